"""Wigner-function negativity along the protocol chain.

Prints the minimum of the Wigner function for the target cat and for
the heralded state at each observable stage: as created, after the
readout storage trips, and as seen by the lossy homodyne detector.
Negativity is the nonclassicality witness here; watching it shrink
stage by stage shows where the protocol loses quantumness.
"""

from dataclasses import replace

import numpy as np

from catbreed import (FockCutoff, ProtocolConfig, TargetCatSpec,
                      pipeline_states, target_cat, wigner_grid)


def wigner_min(rho, axis):
    return float(wigner_grid(rho, axis, axis).min())


def main():
    axis = np.linspace(-4.0, 4.0, 161)
    cat = target_cat(TargetCatSpec(), FockCutoff(20)).to_density()
    print(f"target cat            W_min = {wigner_min(cat, axis):+.4f}")

    for flag, label in ((False, "ideal-detector conditioning"),
                        (True, "detection-aware conditioning")):
        config = replace(ProtocolConfig(),
                         condition_with_detector_efficiency=flag)
        states = pipeline_states(config)
        print(f"\n{label}:")
        print(f"  at creation         W_min = "
              f"{wigner_min(states.creation, axis):+.4f}")
        print(f"  after readout       W_min = "
              f"{wigner_min(states.stored, axis):+.4f}")
        print(f"  at lossy detector   W_min = "
              f"{wigner_min(states.measured, axis):+.4f}")

    print("\nFolding the detector efficiency into the conditioning window")
    print("accepts events whose photon bookkeeping is slightly wrong, so")
    print("the heralded state is softer from the start; the bare-window")
    print("variant keeps a deeper dip but overstates what the detector")
    print("actually resolves.")


if __name__ == "__main__":
    main()
