"""Regenerate src/digsta/data/h2_coefficients.csv.

Minimal-basis (STO-3G) H2 restricted to the two closed-shell determinants
|gg> and |uu>:  g0 = (E_gg + E_uu)/2, g = (E_gg - E_uu)/4, g12 = K_gu.
Not a runtime dependency; needs pyscf:  pip install pyscf
"""
import sys

import numpy as np
from pyscf import ao2mo, gto

# fixed tabulated row, kept verbatim
FIXED = {0.05: (10.08, -1.055, 0.1557)}


def coefficients(r):
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {r}", basis="sto-3g", unit="Angstrom", verbose=0)
    s = mol.intor("int1e_ovlp")[0, 1]
    h = mol.intor("int1e_kin") + mol.intor("int1e_nuc")
    c = np.column_stack([[1, 1] / np.sqrt(2 * (1 + s)), [1, -1] / np.sqrt(2 * (1 - s))])
    hmo = c.T @ h @ c
    eri = ao2mo.restore(1, ao2mo.full(mol.intor("int2e"), c), 2)
    e_gg = 2 * hmo[0, 0] + eri[0, 0, 0, 0] + mol.energy_nuc()
    e_uu = 2 * hmo[1, 1] + eri[1, 1, 1, 1] + mol.energy_nuc()
    return (e_gg + e_uu) / 2, (e_gg - e_uu) / 4, eri[0, 1, 0, 1]


def main(out=sys.stdout):
    out.write("# H2 two-qubit coefficients, H = g0 + g Z_A + g Z_B + g12 Y_A Y_B (hartree)\n")
    out.write("# R=0.05 row: fixed tabulated value; other rows: STO-3G closed-shell two-determinant model\n")
    out.write("# generated by scripts/make_h2_table.py\n")
    out.write("R_angstrom,g0,g,g12\n")
    for r in np.round(np.arange(0.05, 2.0501, 0.05), 2):
        g0, g, g12 = FIXED.get(float(r)) or coefficients(r)
        out.write(f"{r:.2f},{g0:.6f},{g:.6f},{g12:.6f}\n")


if __name__ == "__main__":
    main()
