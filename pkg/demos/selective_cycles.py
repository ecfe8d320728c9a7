"""List the enantio-selective three-level cycles of a molecule."""

import sys

from chiralwave.cycles import SELECTIVE, cycle_report, enumerate_cycles
from chiralwave.rotor import load_molecule

name = sys.argv[1] if len(sys.argv) > 1 else "menthol"
jmax = int(sys.argv[2]) if len(sys.argv) > 2 else 1
mol = load_molecule(name)
cands = enumerate_cycles(mol, jmax)
chosen = [c for c in cands if c.verdict == SELECTIVE]
print(f"{name}: {len(cands)} candidates up to J = {jmax}, {len(chosen)} selective\n")
print(cycle_report(mol, chosen, fmt="text"))
