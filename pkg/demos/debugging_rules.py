"""Three defect hunts with assertion rules.

Each rule is checked while the program runs.  The monitor prints a line per
violation, then a verdict per rule.
"""

from pathlib import Path

from ufomon.cli import main

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

CASES = [
    ("variables read before they are assigned", "uninit"),
    ("sqrt results that do not square back", "sqrt_check"),
    ("pop called on an empty list", "empty_pop"),
    ("stores that are never read again", "dead_store"),
]

if __name__ == "__main__":
    for title, name in CASES:
        print(f"== {title}")
        print((CORPUS / f"{name}.ufo").read_text().strip())
        print("--")
        main(["run", "--rules", str(CORPUS / f"{name}.ufo"),
              "--program", str(CORPUS / f"{name}.mtl")])
        print()
