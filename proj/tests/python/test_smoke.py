"""Smoke tests for the _rqe extension module.

Runnable directly (python tests/python/test_smoke.py) with the built module
on PYTHONPATH; ctest wires that up automatically.
"""

import math

import _rqe


def test_projection():
    w = _rqe.project_simplex([2.0, 0.0])
    assert abs(w[0] - 1.0) < 1e-12 and abs(w[1]) < 1e-12
    w = _rqe.project_simplex([0.5, 0.5, 0.5], 0.1)
    assert abs(sum(w) - 1.0) < 1e-12
    assert min(w) >= 0.1 - 1e-12


def test_certificate():
    profile = _rqe.RiskProfile(tau1=5, tau2=5, eps1=0.2, eps2=0.2)
    cert = _rqe.certify(profile)
    assert cert["evidence"] == "ClosedForm"
    assert cert["is_strict"]
    assert cert["mu"] > 0.0


def test_solve_inspection():
    R = _rqe.inspection_game()
    assert R.R1[0][1] == 5.0 and R.R2[0][0] == -3.0
    profile = _rqe.RiskProfile()
    report = _rqe.solve(R, profile, tol=1e-9)
    assert report["converged"]
    z = report["z"]
    assert abs(sum(z.pi1) - 1.0) < 1e-9
    gap = _rqe.rqe_gap(z, R, profile)
    assert gap <= 1e-5, gap


def test_markov_game_roundtrip():
    mg = _rqe.random_mg(3, (2, 2), 0.3, seed=7)
    clone = _rqe.MarkovGame.from_json(mg.to_json())
    assert clone.to_json() == mg.to_json()
    assert clone.n_states == 3 and clone.gamma == 0.3


def test_value_iteration():
    mg = _rqe.inspection_mg(0.3)
    profile = _rqe.RiskProfile()
    vi = _rqe.value_iteration(mg, profile, tol=1e-8)
    assert vi["final_residual"] <= 1e-8
    assert not any(math.isnan(q) for q in vi["q1"])


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"{name}: ok")
    print("python smoke tests passed")
