"""Chirped simultaneous pulses: which field-free state each enantiomer ends in."""

import numpy as np

from chiralwave import MINUS, PLUS
from chiralwave.threewave import ThreeLevelParams, chirped_passage

params = ThreeLevelParams()
for label, Phi in (("0", 0.0), ("pi/4", np.pi / 4), ("pi/2", np.pi / 2)):
    finals = []
    for en in (PLUS, MINUS):
        tr = chirped_passage(params, en, delta0=2.0, duration=200.0, Phi=Phi, tgrid=[0.0, 200.0])
        finals.append(tr.final)
    print(f"Phi = {label:>5}:  (+) {finals[0].round(4)}  (-) {finals[1].round(4)}")
