"""Enantio-selective three-wave mixing in chiral asymmetric-top molecules."""

from .angular import AngularIndex, sigma_of_m_reflection, symtop_element, wigner3j
from .coupling import MINUS, PLUS, Enantiomer, transition_element
from .rotor import Molecule, RotState, eigenstates, find_state, load_molecule

__version__ = "0.1.0"

__all__ = [
    "AngularIndex",
    "wigner3j",
    "symtop_element",
    "sigma_of_m_reflection",
    "Enantiomer",
    "PLUS",
    "MINUS",
    "transition_element",
    "Molecule",
    "RotState",
    "eigenstates",
    "find_state",
    "load_molecule",
]
