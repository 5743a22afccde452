"""Sweep the storage window length and map the rate/fidelity trade-off.

A longer acceptance window catches more second photons, so the cat rate
grows, but late photons have spent more round trips in the lossy cavity
and drag the mixture fidelity down. The sweep reuses cached per-gap
breeding outcomes, so the whole curve costs little more than its
longest point.
"""

from dataclasses import replace

from catbreed import (ProtocolConfig, calibrate_beta_elec,
                      fidelity_vs_storage_curve, pipeline_states)


def main():
    config = ProtocolConfig()
    print(f"herald rate {config.f_herald / 1e3:.0f} kHz, "
          f"per-trip transmission {config.per_trip_transmission:.6f}, "
          f"readout after {config.readout_trips} trips\n")

    p_mean = pipeline_states(config).mean_condition_probability
    beta = calibrate_beta_elec(config, 1000.0, p_mean)
    print(f"mean condition probability over the default window: {p_mean:.4f}")
    print(f"dead-time factor calibrated to a 1 kHz operating rate: "
          f"beta = {beta:.4f}\n")

    calibrated = replace(config, beta_elec=beta)
    sweep = [1, 2, 3, 5, 8, 15, 25, 40]
    rows = fidelity_vs_storage_curve(calibrated, sweep)

    print(f"{'n_max':>5} {'rate (Hz)':>10} {'F at creation':>14} "
          f"{'F after readout':>16}")
    for row in rows:
        print(f"{row.n_max:>5} {row.rate_hz:>10.1f} "
              f"{row.fidelity_at_creation:>14.4f} "
              f"{row.fidelity_after_readout:>16.4f}")

    p_trip = config.f_herald / config.f_rep
    print("\nThe first accepted gap already costs one round trip, so even")
    print("n_max = 1 sits below the lossless fidelity. Heralds are rare")
    print(f"on the round-trip clock (p = {p_trip:.4f} per trip), so the")
    print("geometric gap law is nearly flat across the window: rate grows")
    print("about linearly with n_max while the mean storage time, and")
    print("with it the loss, grows alongside. Window length is a genuine")
    print("trade-off; n_max = 15 is the 1 kHz point.")


if __name__ == "__main__":
    main()
