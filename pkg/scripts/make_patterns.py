"""Regenerate src/phaselab/data/patterns_v1.json.

Grid layers follow the GridQubit convention: qubit (r, c) couples to its four
square-lattice neighbours.  A horizontal layer with offset o holds the bonds
(r, c)-(r, c+1) with (c + s*r) % 2 == o, where s = 1 for staggered layers and
0 for aligned ones; vertical layers are the transpose.  The lists are stored
explicitly for a 12x12 master patch; smaller grids use the restriction to
their top-left corner.
"""

import json
import pathlib

SIZE = 12
LAYERS = {
    # label: (vertical, offset, staggered)
    "A": (True, 0, True),
    "B": (True, 1, True),
    "C": (False, 1, True),
    "D": (False, 0, True),
    "E": (True, 0, False),
    "F": (True, 1, False),
    "G": (False, 0, False),
    "H": (False, 1, False),
}


def bonds(vertical, offset, staggered):
    out = []
    for r in range(SIZE):
        for c in range(SIZE - 1):
            if (c + (r if staggered else 0)) % 2 != offset:
                continue
            if vertical:
                out.append([[c, r], [c + 1, r]])
            else:
                out.append([[r, c], [r, c + 1]])
    out.sort()
    return out


def main():
    data = {
        "version": 1,
        "assumption": "grid bond partitions are a reading of pictorial layer "
        "definitions; EGFH (aligned) in particular is unverified",
        "chain": {
            "A": "bonds (i, i+1) whose parity differs from the central bond (n/2-1, n/2)",
            "B": "bonds (i, i+1) with the same parity as the central bond",
        },
        "grid_master": [SIZE, SIZE],
        "grid": {k: bonds(*v) for k, v in LAYERS.items()},
    }
    path = pathlib.Path(__file__).resolve().parents[1] / "src/phaselab/data/patterns_v1.json"
    path.write_text(json.dumps(data, indent=1) + "\n")


if __name__ == "__main__":
    main()
