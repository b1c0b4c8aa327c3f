"""Quick check that the extension module loads and agrees with closed forms."""

import json
import math

import optodtc


def main():
    p = optodtc.ModelParams(delta=50.0, drive=10000.0, kappa=10.0, n_phonon=200, g_over_gc=1.2)
    gc = p.critical_coupling()
    alpha = abs(p.alpha)
    expected = math.sqrt((50.0**2 + 10.0**2) / (4 * alpha**2 * 200 * 50.0))
    assert abs(gc - expected) < 1e-12 * expected, (gc, expected)

    cav, dn = optodtc.steady_state(p, "plus")
    assert abs(dn - 100.0 * math.sqrt(1 - 1.2**-4)) < 1e-9, dn

    traj = optodtc.integrate(p, 0j, 0j, 0j, 1.0, sample_step=0.1)
    assert len(traj["t"]) == len(traj["delta_n"]) >= 2

    strobe = optodtc.run_dtc(p, 100.0, 1.196, 100.0, 10)
    assert all(a * b < 0 for a, b in zip(strobe, strobe[1:])), strobe

    k, x1, x2 = optodtc.equilibrium_positions(7, -1, 1, 0.85)
    roots = optodtc.solve_k(x1, x2, 0.85, k - 0.5, k + 0.5)
    assert any(abs(r - k) < 1e-9 for r in roots), (k, roots)

    meta, files = optodtc.run(optodtc.preset("fig4"))
    assert json.loads(meta)["task"] == "dtc-run"
    assert "stroboscopic.csv" in dict(files)

    try:
        optodtc.run('task = "steady"\nbogus = 1\n')
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    print("smoke test ok:", repr(p), f"g_c = {gc:.6g}")


if __name__ == "__main__":
    main()
