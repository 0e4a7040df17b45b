"""Smoke test for the edca_perf extension module."""

import math

import edca_perf


def main():
    sc = edca_perf.Scenario(10)
    fp = edca_perf.solve(sc)
    assert fp.residual <= 1e-12 and fp.pi[0] == 0.0
    assert abs(fp.tau_station - (1 - math.prod(1 - t for t in fp.tau_ac))) < 1e-15

    acs = edca_perf.analyze(sc)
    assert len(acs) == edca_perf.NUM_ACS
    delays = [m.e_delay for m in acs]
    assert max(delays[:2]) < delays[2] < delays[3], delays

    sc.set("ac0.cw_min=15")
    assert "cw_min = 15" in sc.to_config()
    assert edca_perf.analyze(sc)[0].e_delay != delays[0]
    round_trip = edca_perf.Scenario.from_config(sc.to_config())
    assert round_trip.to_config() == sc.to_config()

    runs = edca_perf.simulate(edca_perf.Scenario(5), horizon_slots=200_000, seed=3)
    assert runs[0].success_count > 0 and 0.0 < runs[0].collision_rate < 1.0
    rep = edca_perf.replicate(edca_perf.Scenario(5), [1, 2, 3], horizon_slots=200_000)
    assert rep[0].delay[1] > 0.0 and not rep[0].censored

    dist, moments, residual = edca_perf.verify_chain([(1, 3, 2, 1)], [0.0, 0.3, 0.6])
    assert dist < 1e-9 and moments < 1e-12 and residual < 1e-12

    for bad in (lambda: edca_perf.Scenario(10, "turbo"), lambda: sc.set("ac9.cw_min=1")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    try:
        edca_perf.simulate(sc, horizon_slots=0)
    except edca_perf.EdcaError:
        pass
    else:
        raise AssertionError("expected EdcaError")
    print("edca_perf smoke test ok:", ", ".join(f"AC{m.ac} {m.e_delay / 1000:.1f} ms" for m in acs))


if __name__ == "__main__":
    main()
