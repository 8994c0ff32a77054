"""Smoke test for the mrplab extension module."""

import math

import mrplab


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    p, gamma = 0.5, 0.5
    m = mrplab.Mrp.two_state(p, gamma, reward="exit")
    assert m.num_states == 2 and m.gamma == gamma
    v = m.exact_value()
    assert close(v[0], (1 - p) / (1 - gamma * p))
    assert not m.is_acyclic()

    paths = m.sample_paths(4, seed=7)
    assert paths == m.sample_paths(4, seed=7)
    assert all(s[-1] == 1 for s, _ in paths)

    ml = mrplab.ml_value(m, paths)
    assert ml == mrplab.lstd(m, paths)
    mc = mrplab.mc_first_visit(m, paths)
    mvu = mrplab.mvu_estimate(m, paths)
    td = mrplab.td_estimate(m, paths, lam=0.0, modified=True)
    for est in (ml, mc, mvu, td, mrplab.iml(m, paths), mrplab.mc_every_visit(m, paths)):
        assert len(est) == 2 and est[0] is not None

    # single path: MVU is first-visit MC
    one = m.sample_paths(1, seed=3)
    assert close(mrplab.mvu_estimate(m, one)[0], mrplab.mc_first_visit(m, one)[0])

    assert round(mrplab.mvu_two_state_mse(0.5, 0.5), 3) == 0.127
    assert round(mrplab.ml_two_state_mse(0.5, 2), 3) == 0.072
    assert close(mrplab.dilogarithm(1.0), math.pi ** 2 / 6)
    assert mrplab.mvu_two_state_closed(6, 4, 1.0) == 1.5
    mse, bias, var = mrplab.mse_decompose([1.0, 3.0], 1.0)
    assert (mse, bias, var) == (2.0, 1.0, 1.0)

    cyc = mrplab.Mrp.two_state(0.5, 0.7)
    bad = cyc.to_json().replace('"gamma": 0.7', '"gamma": 1.5')
    assert mrplab.validate(bad)
    try:
        mrplab.Mrp.from_json(bad)
    except mrplab.MrpLabError:
        pass
    else:
        raise AssertionError("invalid discount accepted")

    print("mrplab smoke test ok")


if __name__ == "__main__":
    main()
