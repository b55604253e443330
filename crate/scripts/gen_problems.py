"""Writes the problem documents under problems/ that are generated rather than hand-written."""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "problems"
A = [[1.0, 1.5], [5.0, 0.2]]
DIRICHLET = [{"u:0:-1": 1.0}, {"u:0:1": 1.0}, {"v:0:-1": 1.0}, {"v:0:1": 1.0}]


def mono(n, c=1.0):
    return [0.0] * n + [c]


def term(coeff, a, b):
    return {"coeff": coeff, "factors": [a, b]}


def f(var, d=0):
    return {"var": var, "deriv": d}


def lyapunov(dp):
    """Lyapunov functional w^T P(x) w for dw/dt = gamma w'' + A w on [0, 1]."""
    entries = {"p11": ("u", "u"), "p12": ("u", "v"), "p22": ("v", "v")}
    pnames = {e: [f"{e}_{n}" for n in range(dp + 1)] for e in entries}
    params = ["gamma"] + [p for e in entries for p in pnames[e]]

    # P - I ⪰ 0 as an integral inequality with no derivatives
    t1 = []
    for e, (a, b) in entries.items():
        scale = 2.0 if a != b else 1.0
        coeff = {"params": {p: mono(n, scale) for n, p in enumerate(pnames[e])}}
        if a == b:
            coeff["const"] = [-1.0]
        t1.append(term(coeff, f(a), f(b)))

    # -gamma w^T P w'' - w^T P A w
    t2 = []
    for e, (a, b) in entries.items():
        for n, p in enumerate(pnames[e]):
            t2.append(term({"params": {f"gamma*{p}": mono(n, -1.0)}}, f(a), f(b, 2)))
            if a != b:
                t2.append(term({"params": {f"gamma*{p}": mono(n, -1.0)}}, f(b), f(a, 2)))
    # (PA) entries as linear combinations of P entries
    pa = {
        ("u", "u"): {"p11": A[0][0], "p12": A[1][0]},
        ("v", "v"): {"p12": A[0][1], "p22": A[1][1]},
        ("u", "v"): {"p11": A[0][1], "p12": A[1][1] + A[0][0], "p22": A[1][0]},
    }
    for (a, b), combo in pa.items():
        coeff = {"params": {}}
        for e, c in combo.items():
            for n, p in enumerate(pnames[e]):
                coeff["params"][p] = mono(n, -c)
        t2.append(term(coeff, f(a), f(b)))

    return {
        "parameters": params,
        "cost": [1.0] + [0.0] * (len(params) - 1),
        "domain": [0.0, 1.0],
        "inequalities": [
            {"variables": [{"name": "u", "k": 0, "l": 0}, {"name": "v", "k": 0, "l": 0}], "terms": t1, "bcs": []},
            {"variables": [{"name": "u", "k": 2, "l": 2}, {"name": "v", "k": 2, "l": 2}], "terms": t2, "bcs": DIRICHLET},
        ],
    }


def lyapunov_identity():
    terms = [
        term({"params": {"gamma": [-1.0]}}, f("u"), f("u", 2)),
        term({"params": {"gamma": [-1.0]}}, f("v"), f("v", 2)),
        term({"const": [-A[0][0]]}, f("u"), f("u")),
        term({"const": [-(A[0][1] + A[1][0])]}, f("u"), f("v")),
        term({"const": [-A[1][1]]}, f("v"), f("v")),
    ]
    return {
        "parameters": ["gamma"],
        "cost": [1.0],
        "domain": [0.0, 1.0],
        "variables": [{"name": "u", "k": 2, "l": 2}, {"name": "v", "k": 2, "l": 2}],
        "terms": terms,
        "bcs": DIRICHLET,
    }


def degenerate_elliptic():
    """x^2 (u')^2 + (v')^2 - gamma u v: feasible near gamma = 0 yet S(0) is singular."""
    return {
        "parameters": ["gamma"],
        "cost": [-1.0],
        "variables": [{"name": "u", "k": 1, "l": 1}, {"name": "v", "k": 1, "l": 1}],
        "terms": [
            term({"const": [0.0, 0.0, 1.0]}, f("u", 1), f("u", 1)),
            term({"const": [1.0]}, f("v", 1), f("v", 1)),
            term({"params": {"gamma": [-1.0]}}, f("u"), f("v")),
        ],
        "bcs": DIRICHLET,
    }


def main():
    docs = {f"lyapunov_dp{d}.json": lyapunov(d) for d in (0, 2, 4, 6)}
    docs["lyapunov_identity.json"] = lyapunov_identity()
    docs["degenerate_elliptic.json"] = degenerate_elliptic()
    for name, doc in docs.items():
        (OUT / name).write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
