"""Field-dressed energies of the cyclic three-level model against the loop phase."""

import numpy as np

from chiralwave import MINUS, PLUS
from chiralwave.threewave import ThreeLevelParams, dressed_spectrum


def main():
    params = ThreeLevelParams()  # unit couplings, on resonance
    print(f"{'Phi/pi':>7}  {'(+) energies':>26}  {'(-) energies':>26}")
    for Phi in np.linspace(0, 2 * np.pi, 9):
        ep = dressed_spectrum(params, PLUS, Phi)
        em = dressed_spectrum(params, MINUS, Phi)
        fmt = lambda e: " ".join(f"{x:8.4f}" for x in e)
        print(f"{Phi / np.pi:7.3f}  {fmt(ep)}  {fmt(em)}")
    # a common detuning splits the degenerate pair
    detuned = ThreeLevelParams(delta12=0.5, delta23=0.5)
    print("\nPhi = 0, delta = 0.5:", dressed_spectrum(detuned, PLUS, 0.0).round(4))


if __name__ == "__main__":
    main()
