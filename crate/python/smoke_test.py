"""Smoke test for the Python bindings; run after `maturin develop`."""

import json
import math
import tempfile
from pathlib import Path

import sbs


def main() -> None:
    geom = sbs.Geometry(10.0, 5.0, 1.0, 1000.0)
    dist = sbs.PhotonDistribution({"kind": "point", "k": 0.05, "cos_theta": 0.5}, geom)
    tau = dist.decoherence_time()
    assert tau > 0 and math.isfinite(tau)
    finite = dist.decoherence_factor(0.0, geom.photon_count(tau))
    assert abs(finite - math.exp(-1.0)) < 1e-6, finite
    report = dist.overlap_report(seed=3)
    assert 0.99 < report["alpha"] <= 1.0, report["alpha"]

    iso = sbs.PhotonDistribution({"kind": "isotropic_monochromatic", "k": 0.05}, geom)
    assert iso.overlap_report()["alpha"] < 1e-10

    c, s = math.cos(0.475 * math.pi), math.sin(0.475 * math.pi)
    state = sbs.OutState(
        rho_s=[[0.5, 0.5], [0.5, 0.5]],
        env=[[0.999, 0.0], [0.0, 0.001]],
        s1=[[1, 0], [0, 1]],
        s2=[[c, -s], [s, c]],
        n_t=12,
        f=0.5,
        m=0.25,
    )
    assert abs(state.mutual_information() - 1.0) < 0.05
    assert state.tail_norm() < 0.01
    curve = state.plateau([0.25, 0.5, 0.75])
    assert curve["phase"] == ["broadcasting"] * 3, curve["phase"]
    try:
        state.with_fraction(1.0).with_fraction(1.0).broadcast_distance()
    except OverflowError:
        pass

    assert sbs.binary_entropy(0.5) == 1.0
    assert sbs.fannes_audenaert(0.0, 3) == 0.0
    rows = sbs.verify_bound(7, 10)
    assert min(r["report"]["slack"] for r in rows) >= -1e-9

    h = 1 / math.sqrt(2)
    p = sbs.unistochastic([[h, h], [h, -h]])
    assert all(abs(x - 0.5) < 1e-15 for row in p for x in row)
    lam = sbs.stationary_distribution([[0.7, 0.2], [0.3, 0.8]])
    assert abs(lam[0] - 0.4) < 1e-12

    with tempfile.TemporaryDirectory() as tmp:
        files = sbs.run("bounds", {"seed": 1, "bounds": {"trials": 3}}, Path(tmp))
        assert [Path(f).name for f in files] == ["bounds.csv", "bounds.json"]
        summary = json.loads(Path(files[1]).read_text())
        assert summary["trials"] == 3
        try:
            sbs.run("plateau", {"seed": 1, "fractions": {"m": 3}}, Path(tmp))
            raise AssertionError("invalid config accepted")
        except ValueError as e:
            assert "fractions.m" in str(e)

    print("python smoke test passed")


if __name__ == "__main__":
    main()
