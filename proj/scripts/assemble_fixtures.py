#!/usr/bin/env python3
"""Flatten fixture sources into single-file contracts and write the corpus manifest."""
import json
import pathlib
import re

ROOT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
HEADER = "// SPDX-License-Identifier: MIT\npragma solidity ^0.8.0;\n\n"
INCLUDE = re.compile(r"^// @include (\S+)\s*$")

# contract under test and expected defect kinds per corpus file
EXPECTED = {
    "rmp_proxy": ("ProxyNFT", ["RiskyMutableProxy"]),
    "rmp_proxy_fixed": ("ProxyNFTFixed", []),
    "er_mintnft": ("HypeNFT", ["ERC721Reentrancy"]),
    "er_mintnft_fixed": ("HypeNFTFixed", []),
    "um_reserve": ("BoredApeYachtClub", ["UnlimitedMinting"]),
    "um_reserve_fixed": ("BoredApeYachtClubFixed", []),
    "mr_approve": ("LooseApprove", ["MissingRequirements"]),
    "mr_approve_fixed": ("StrictApprove", []),
    "pb_burn": ("BurnableNFT", ["PublicBurn"]),
    "pb_burn_fixed": ("BurnableNFTFixed", []),
    "benign_reference": ("ReferenceCollection", []),
    "er_noguard": ("FreeClaim", ["ERC721Reentrancy", "UnlimitedMinting"]),
    "um_constant_supply": ("ConstantCap", ["UnlimitedMinting"]),
    "pb_caller_mapping": ("HolderBurn", []),
    "mr_mint_zero": ("SimpleNFT", ["MissingRequirements"]),
}


def flatten(path):
    out = []
    for line in path.read_text().splitlines():
        m = INCLUDE.match(line)
        if m:
            out.append((ROOT / "parts" / m.group(1)).read_text().rstrip("\n"))
        else:
            out.append(line)
    return HEADER + "\n".join(out).strip("\n") + "\n"


def build(src_dir, dst_dir):
    dst_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for src in sorted(src_dir.glob("*.sol")):
        (dst_dir / src.name).write_text(flatten(src))
        names.append(src.stem)
    return names


def main():
    names = build(ROOT / "src", ROOT / "corpus")
    manifest = []
    for name in names:
        contract, expected = EXPECTED[name]
        manifest.append({"file": name + ".sol", "contract": contract, "expected": expected})
    (ROOT / "corpus" / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    build(ROOT / "bounds_src", ROOT / "bounds")


if __name__ == "__main__":
    main()
