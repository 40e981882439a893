#!/usr/bin/env python3
"""Fetch the remaining benchmark datasets (needs network access).

The package bundles wdbc and wine. This script downloads the other six
small benchmark sets from the LIBSVM binary-classification collection,
normalizes their labels to {-1, +1}, validates the expected shapes, and
drops them next to the bundled data so they become loadable by name:

    python scripts/fetch_datasets.py [--dest src/uncertal/datasets]

Sources (https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/):
    breast      breast-cancer   683 x 10   labels {2, 4}
    heart       heart           270 x 13   labels {+1, -1}
    ionosphere  ionosphere_scale 351 x 34  labels {+1, -1}
    sonar       sonar_scale     208 x 60   labels {+1, -1}
    pima        diabetes        768 x 8    labels {+1, -1}
    australian  australian      690 x 14   labels {+1, -1}
"""

import argparse
import sys
import urllib.request
from pathlib import Path

BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"

# name -> (remote file, expected (n, d), label remap)
SOURCES = {
    "breast": ("breast-cancer", (683, 10), {2.0: "+1", 4.0: "-1"}),
    "heart": ("heart", (270, 13), None),
    "ionosphere": ("ionosphere_scale", (351, 34), None),
    "sonar": ("sonar_scale", (208, 60), None),
    "pima": ("diabetes", (768, 8), None),
    "australian": ("australian", (690, 14), None),
}


def fetch(name: str, dest: Path) -> None:
    remote, (n_exp, d_exp), remap = SOURCES[name]
    url = BASE + remote
    print(f"{name}: downloading {url}")
    raw = urllib.request.urlopen(url, timeout=60).read().decode("utf-8")
    lines = []
    max_idx = 0
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        label = float(parts[0])
        if remap is not None:
            parts[0] = remap[label]
        elif label not in (1.0, -1.0):
            raise SystemExit(f"{name}: unexpected label {label}")
        for tok in parts[1:]:
            max_idx = max(max_idx, int(tok.split(":", 1)[0]))
        lines.append(" ".join(parts))
    if (len(lines), max_idx) != (n_exp, d_exp):
        raise SystemExit(
            f"{name}: got {len(lines)} x {max_idx}, expected {n_exp} x {d_exp}; "
            "upstream file may have changed")
    out = dest / f"{name}.libsvm"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{name}: wrote {out} ({len(lines)} x {max_idx})")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default=None,
                        help="target directory (default: the package's "
                             "bundled dataset directory)")
    parser.add_argument("names", nargs="*", default=[],
                        help=f"subset to fetch (default: all of "
                             f"{', '.join(SOURCES)})")
    args = parser.parse_args()
    if args.dest is None:
        here = Path(__file__).resolve().parent.parent
        dest = here / "src" / "uncertal" / "datasets"
        if not dest.is_dir():
            import uncertal.datasets
            dest = Path(list(uncertal.datasets.__path__)[0])
    else:
        dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    names = args.names or list(SOURCES)
    for name in names:
        if name not in SOURCES:
            raise SystemExit(f"unknown dataset {name}; know {list(SOURCES)}")
        fetch(name, dest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
