"""Smoke test for the orlicz_ps extension module.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import json
import math
import os
import tempfile

import orlicz_ps as op


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b, tol)


def main():
    phi = op.OrliczFunction.power(2.0)
    assert phi.is_even and phi(-3.0) == 9.0
    close(phi.c_phi(), 1.0, 1e-12)
    asym = op.OrliczFunction.from_json('{"family":"asymmetric_power","p":2.0,"lambda":0.3}')
    assert not asym.is_even
    assert json.loads(asym.to_json())["family"] == "asymmetric_power"
    assert json.loads(phi.validate())["passed"]

    # ‖(1, -1, 2)‖ with unit weights under t² is the root of Σ(s/λ)²/3 = 1
    close(op.luxemburg_norm([1.0, -1.0, 2.0], [1.0, 1.0, 1.0], phi), math.sqrt(2.0), 1e-10)

    f = op.ScalarField.sample(2, 1.5, 64, lambda x: max(0.0, 1.0 - x[0] ** 2 - x[1] ** 2))
    assert f.resolution == [64, 64] and f.max() > 0.9
    s = f.steiner([0.6, 0.8])
    close(s.integral(), f.integral(), 0.02 * f.integral())
    r = f.sdr()
    close(r.integral(), f.integral(), 1e-12)
    g, trace = f.approximate_sdr(4)
    assert len(json.loads(trace)) == 4

    e = f.energy(phi, nodes=128)
    close(e, s.energy(phi, nodes=128), 0.02 * e)
    assert len(f.affine_ball(phi, nodes=64)) == 64

    disk = op.StarBody.ball(2, 1.0, 512)
    cone = disk.cone_function(1.1, 128)
    close(cone.energy(phi, nodes=512) * math.sqrt(2 * math.pi), 1.0, 0.01)
    close(op.StarBody.ellipse(1.5, 1 / 1.5).petty_ratio(phi), disk.petty_ratio(phi), 0.015)
    assert len(disk.projection_support(phi)) == 512

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "disk.field")
        cone.write(path, "cone")
        back = op.ScalarField.read(path)
        assert back.values == cone.values

    cfg = json.loads(op.default_config())
    cfg["corpus"]["resolution"] = 40
    cfg["corpus"]["fields"] = cfg["corpus"]["fields"][:2]
    cfg["phis"] = [{"family": "power", "p": 2.0}]
    cfg["quadrature_count"] = 64
    report = json.loads(op.run_suite("certificates", json.dumps(cfg)))
    assert report["schema"] == "v1" and report["summary"]["failed"] == 0

    try:
        op.OrliczFunction.power(0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("power(0.5) should be rejected")

    print(f"orlicz_ps {op.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
