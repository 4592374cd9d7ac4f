#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Write the bundled JSON cases and reference OPF solutions.

Cases come from pypower's bundled data. References are solved with pypower's
interior point OPF at tight tolerances and stored per unit.
"""
import json
import os
import sys

import numpy as np
from pypower import api
from pypower.api import ppoption, runopf

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "fixtures")

CASE3 = {
    "baseMVA": 100.0,
    "bus": np.array([
        [1, 3, 110, 40, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
        [2, 2, 110, 40, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
        [3, 2, 95, 50, 0, 0, 1, 1, 0, 345, 1, 1.1, 0.9],
    ], dtype=float),
    "gen": np.array([
        [1, 0, 0, 1000, -1000, 1, 100, 1, 2000, 0],
        [2, 0, 0, 1000, -1000, 1, 100, 1, 2000, 0],
        [3, 0, 0, 1000, -1000, 1, 100, 1, 0, 0],
    ], dtype=float),
    "branch": np.array([
        [1, 3, 0.065, 0.62, 0.45, 9000, 0, 0, 0, 0, 1, -360, 360],
        [3, 2, 0.025, 0.75, 0.7, 50, 0, 0, 0, 0, 1, -360, 360],
        [1, 2, 0.042, 0.9, 0.3, 9000, 0, 0, 0, 0, 1, -360, 360],
    ], dtype=float),
    "gencost": np.array([
        [2, 0, 0, 3, 0.11, 5, 0],
        [2, 0, 0, 3, 0.085, 1.2, 0],
        [2, 0, 0, 3, 0, 0, 0],
    ], dtype=float),
}

def case4():
    # Zero based bus numbers and a slack unit without capacity; shift the
    # numbering and give every unit room to dispatch.
    ppc = api.case4gs()
    ppc["bus"][:, 0] += 1
    ppc["gen"][:, 0] += 1
    ppc["branch"][:, 0:2] += 1
    ppc["gen"][:, 8] = 500
    ppc["gen"][:, 9] = 0
    ppc["gen"][:, 3] = 300
    ppc["gen"][:, 4] = -300
    return ppc


CASES = {
    "case3": lambda: {k: (v.copy() if hasattr(v, "copy") else v) for k, v in CASE3.items()},
    "case4": lambda: case4(),
    "case9": api.case9,
    "case14": api.case14,
    "case24": api.case24_ieee_rts,
    "case30": api.case30,
    "case39": api.case39,
    "case57": api.case57,
    "case118": api.case118,
    "case300": api.case300,
}


def pad_gen(gen):
    if gen.shape[1] < 21:
        gen = np.hstack([gen, np.zeros((gen.shape[0], 21 - gen.shape[1]))])
    return gen


def pad_branch(br):
    if br.shape[1] < 13:
        extra = np.zeros((br.shape[0], 13 - br.shape[1]))
        extra[:, -2:] = [-360, 360]
        br = np.hstack([br, extra])
    return br


def to_json(name, ppc):
    base = float(ppc["baseMVA"])
    buses = []
    types = {1: "pq", 2: "pv", 3: "ref"}
    for r in ppc["bus"]:
        if int(r[1]) == 4:
            continue
        buses.append({
            "id": int(r[0]), "bus_type": types[int(r[1])],
            "pd": r[2] / base, "qd": r[3] / base, "gs": r[4] / base, "bs": r[5] / base,
            "vmin": r[12], "vmax": r[11], "base_kv": r[9],
        })
    branches = [{
        "from": int(r[0]), "to": int(r[1]), "r": r[2], "x": r[3], "b": r[4],
        "tap": r[8], "shift": r[9], "rate_a": r[5] / base, "status": int(r[10] > 0),
    } for r in ppc["branch"]]
    gens = [{
        "bus": int(r[0]), "pmin": r[9] / base, "pmax": r[8] / base,
        "qmin": r[4] / base, "qmax": r[3] / base, "status": int(r[7] > 0),
    } for r in ppc["gen"]]
    costs = []
    for k, r in enumerate(ppc["gencost"][: len(gens)]):
        assert int(r[0]) == 2
        n = int(r[3])
        coef = list(r[4:4 + n])
        coef = [0.0] * (3 - n) + coef
        costs.append({"gen": k, "a": coef[0], "b": coef[1], "c": coef[2]})
    return {"name": name, "base_mva": base, "buses": buses, "branches": branches,
            "gens": gens, "costs": costs}


def reference(name, ppc):
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PDIPM_FEASTOL=1e-10, PDIPM_GRADTOL=1e-10,
                   PDIPM_COMPTOL=1e-10, PDIPM_COSTTOL=1e-12, PDIPM_MAX_IT=500)
    r = runopf(ppc, opt)
    if not r["success"]:
        r = runopf(ppc, ppoption(VERBOSE=0, OUT_ALL=0, PDIPM_FEASTOL=1e-8, PDIPM_GRADTOL=1e-8,
                                 PDIPM_COMPTOL=1e-8, PDIPM_MAX_IT=500))
    if not r["success"]:
        print(f"{name}: reference OPF did not converge", file=sys.stderr)
        return None
    base = r["baseMVA"]
    keep = r["bus"][:, 1] != 4
    vm = r["bus"][keep, 7]
    va = np.deg2rad(r["bus"][keep, 8])
    v = vm * np.exp(1j * va)
    on = r["gen"][:, 7] > 0
    return {
        "name": name,
        "bus_ids": [int(b) for b in r["bus"][keep, 0]],
        "v_re": list(v.real), "v_im": list(v.imag),
        "pg": list(r["gen"][on, 1] / base), "qg": list(r["gen"][on, 2] / base),
        "objective": float(r["f"]),
    }


def with_default_cost(make):
    def f():
        ppc = make()
        if "gencost" not in ppc:
            # Power flow only cases get a uniform quadratic cost.
            ng = ppc["gen"].shape[0]
            ppc["gencost"] = np.tile([2, 0, 0, 3, 0.01, 40, 0], (ng, 1)).astype(float)
        return ppc
    return f


def main():
    for name, make in CASES.items():
        make = with_default_cost(make)
        ppc = make()
        ppc["gen"] = pad_gen(np.asarray(ppc["gen"], dtype=float))
        ppc["branch"] = pad_branch(np.asarray(ppc["branch"], dtype=float))
        with open(os.path.join(OUT, "cases", name + ".json"), "w") as fh:
            json.dump(to_json(name, ppc), fh, indent=1)
        ref = reference(name, make())
        if ref is not None:
            with open(os.path.join(OUT, "reference", name + ".json"), "w") as fh:
                json.dump(ref, fh, indent=1)
        print(name, "ok" if ref else "case only")


if __name__ == "__main__":
    main()
