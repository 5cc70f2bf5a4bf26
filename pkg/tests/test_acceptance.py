"""Acceptance suite: one test per release criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s`. The slow end-to-end sweeps
live here; everything is seeded and deterministic.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats

from agileplan.bench import RunConfig, sweep
from agileplan.cli import main as cli_main
from agileplan.environment import ForestSpec, GapWallSpec, gen_forest, gen_gap_wall, gen_pole
from agileplan.expert import ExpertConfig, global_plan, label, mh_chain
from agileplan.feasibility import SensingParams, VehicleParams, optimize_phi, rot_latency
from agileplan.geometry import CollisionModel, collision_cost, collision_cost_array, in_collision
from agileplan.multimodal import (
    HypothesisSet,
    LabelSet,
    LossConfig,
    assignment_weights,
    fit_hypotheses,
    rwta_loss,
)
from agileplan.trajectory import (
    DiscreteTrajectory,
    InitialState,
    eq4_times,
    project_quintic,
    project_quintic_kkt,
)


@contextmanager
def criterion(name, budget_s):
    t0 = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {name}: FAIL ({time.perf_counter() - t0:.1f}s)")
        raise
    dt = time.perf_counter() - t0
    assert dt < budget_s, f"{name} exceeded its {budget_s}s runtime budget ({dt:.1f}s)"
    print(f"ACCEPTANCE {name}: PASS ({dt:.1f}s)")


# 1 ------------------------------------------------------------------------------


def test_feasibility_golden_table():
    with criterion("feasibility-golden", 1.0):
        veh = VehicleParams(J=0.007, T_max=1.02, c_max=35.3, r_obs=0.95)
        for t_p, v_want in ((0.0652, 12.0), (0.0191, 13.2), (0.0103, 13.5)):
            sp = SensingParams(s=6.0, t_s=0.066, t_p=t_p)
            phi, v_max = optimize_phi(veh, sp)
            assert math.degrees(phi) == pytest.approx(65.5, abs=0.5)
            assert rot_latency(veh, phi) * 1000 == pytest.approx(125.2, abs=0.5)
            assert v_max == pytest.approx(v_want, abs=0.05)


# 2 ------------------------------------------------------------------------------


def test_collision_cost_contract():
    with criterion("collision-cost-contract", 5.0):
        m = CollisionModel(r_q=0.2)
        assert collision_cost(m, 0.0) == 4.0
        assert collision_cost(m, 2 * m.r_q) == 0.0
        d = np.linspace(0.0, 4 * m.r_q, 10_000)
        c = collision_cost_array(m, d)
        inside = d <= 2 * m.r_q
        assert np.all(np.diff(c[inside]) <= 0.0)          # non-increasing inside
        assert np.all(c[~inside] == 0.0)                  # identically zero beyond
        assert np.all(np.abs(np.diff(c)) < 2e-3)          # no jumps on this grid
        np.testing.assert_allclose(c[inside], -d[inside] ** 2 / m.r_q ** 2 + 4.0)


# 3 ------------------------------------------------------------------------------


def test_mh_chain_matches_bimodal_target():
    with criterion("mh-bimodal-total-variation", 10.0):
        mu, sigma = 2.0, 0.6

        def log_mix(x):
            a = -0.5 * ((x[0] + mu) / sigma) ** 2
            b = -0.5 * ((x[0] - mu) / sigma) ** 2
            m = max(a, b)
            return m + math.log(0.5 * math.exp(a - m) + 0.5 * math.exp(b - m))

        # the planner's own proposal schedule and sample budget
        cfg = ExpertConfig()
        res = mh_chain(log_mix, np.zeros(1), cfg.total_samples, cfg.proposal_stds(),
                       np.random.default_rng(0))
        assert np.all(np.isfinite(res.log_alphas))  # acceptance prob > 0 on all steps
        edges = np.linspace(-5.0, 5.0, 51)
        hist, _ = np.histogram(res.states[:, 0], bins=edges)
        p_hat = hist / hist.sum()

        def cdf(x):
            return 0.5 * (stats.norm.cdf(x, -mu, sigma) + stats.norm.cdf(x, mu, sigma))

        p_true = np.diff([cdf(e) for e in edges])
        p_true /= p_true.sum()
        tv = 0.5 * np.abs(p_hat - p_true).sum()
        assert tv <= 0.05, f"total variation {tv:.4f} > 0.05"


# 4 ------------------------------------------------------------------------------


def test_rwta_property_suite():
    with criterion("rwta-properties", 30.0):
        cfg = LossConfig()
        rng = np.random.default_rng(0)

        # assignment weights sum to one per label
        for m in (2, 3, 5):
            labels = LabelSet(rng.normal(size=(6, 10, 3)))
            hyps = HypothesisSet(rng.normal(size=(m, 10, 3)))
            np.testing.assert_allclose(assignment_weights(labels, hyps, cfg).sum(axis=1), 1.0)

        # analytic gradient vs full central finite differences, 100 instances
        for _ in range(100):
            while True:
                labels = LabelSet(rng.normal(size=(4, 10, 3)))
                hyps = HypothesisSet(rng.normal(size=(3, 10, 3)))
                d2 = np.array([[np.sum((l - h) ** 2) for h in hyps.positions]
                               for l in labels.positions])
                srt = np.sort(d2, axis=1)
                if np.min(srt[:, 1] - srt[:, 0]) > 1e-3:  # away from ties
                    break
            _, grad = rwta_loss(labels, hyps, cfg)
            h = 1e-6
            fd = np.zeros_like(grad)
            for k in range(3):
                for i in range(10):
                    for j in range(3):
                        plus = hyps.positions.copy()
                        plus[k, i, j] += h
                        minus = hyps.positions.copy()
                        minus[k, i, j] -= h
                        fd[k, i, j] = (rwta_loss(labels, HypothesisSet(plus), cfg)[0]
                                       - rwta_loss(labels, HypothesisSet(minus), cfg)[0]) / (2 * h)
            denom = max(np.abs(fd).max(), 1.0)
            assert np.abs(grad - fd).max() / denom < 1e-5

        # M = 1 reduces to the plain squared error
        labels = LabelSet(rng.normal(size=(5, 10, 3)))
        hyp = rng.normal(size=(1, 10, 3))
        loss, _ = rwta_loss(labels, HypothesisSet(hyp), cfg)
        assert loss == pytest.approx(sum(np.sum((l - hyp[0]) ** 2) for l in labels.positions))

        # mode preservation vs mode collapse on a two-cluster label set
        # (tight clusters: the expert's trajectory modes at one state)
        base = np.zeros((10, 3))
        base[:, 0] = eq4_times()
        offset = np.zeros((10, 3))
        offset[:, 1] = 1.0
        gen = np.random.default_rng(1)
        a = base + offset + 0.1 * gen.standard_normal((20, 10, 3))
        b = base - offset + 0.1 * gen.standard_normal((20, 10, 3))
        labels = LabelSet(np.concatenate([a, b]))
        mean_a, mean_b = a.mean(axis=0), b.mean(axis=0)
        global_mean = labels.positions.mean(axis=0)
        spread = float(np.sqrt(np.mean(
            np.sum((labels.positions - global_mean) ** 2, axis=(1, 2)))))

        multi, _ = fit_hypotheses(labels, 3, cfg, steps=600, step_size=0.4 / 40, seed=0)
        d_a = min(np.linalg.norm(h - mean_a) for h in multi.positions)
        d_b = min(np.linalg.norm(h - mean_b) for h in multi.positions)
        assert d_a <= 0.1 * spread, f"cluster A missed: {d_a:.3f} > 10% of spread {spread:.3f}"
        assert d_b <= 0.1 * spread, f"cluster B missed: {d_b:.3f} > 10% of spread {spread:.3f}"

        uni, _ = fit_hypotheses(labels, 1, cfg, steps=600, step_size=0.4 / 40, seed=0)
        assert np.linalg.norm(uni.positions[0] - global_mean) <= 0.1 * spread
        # the unimodal answer is far from either mode: the collapse contrast
        assert np.linalg.norm(uni.positions[0] - mean_a) > 5 * d_a
        assert np.linalg.norm(uni.positions[0] - mean_b) > 5 * d_b


# 5 ------------------------------------------------------------------------------


def test_projection_suite():
    from scipy.optimize import minimize

    with criterion("quintic-projection", 10.0):
        rng = np.random.default_rng(0)
        times = eq4_times()
        basis = times[:, None] ** np.arange(6)
        for _ in range(1000):
            samples = rng.normal(scale=2.0, size=(10, 3))
            init = InitialState(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
            traj = DiscreteTrajectory(times, samples)
            q, lam = project_quintic_kkt(traj, init)
            np.testing.assert_allclose(q.position(0.0), init.position, atol=1e-9)
            np.testing.assert_allclose(q.velocity(0.0), init.velocity, atol=1e-9)
            np.testing.assert_allclose(q.acceleration(0.0), init.acceleration, atol=1e-9)

        # independent numeric minimizer never beats the KKT solution by > 1e-6
        for _ in range(150):
            samples = rng.normal(scale=2.0, size=(10, 3))
            init = InitialState(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
            q = project_quintic(DiscreteTrajectory(times, samples), init)
            for ax in range(3):
                fixed = np.array([init.position[ax], init.velocity[ax], init.acceleration[ax] / 2])

                def obj(z):
                    r = samples[:, ax] - basis @ np.concatenate([fixed, z])
                    return float(r @ r)

                res = minimize(obj, np.zeros(3), method="L-BFGS-B",
                               options={"ftol": 1e-15, "gtol": 1e-12})
                ours = float(np.sum((samples[:, ax] - basis @ q.coeffs[ax]) ** 2))
                assert ours <= res.fun + 1e-6

        # idempotence: projecting the projection's own samples is a fixed point
        for _ in range(100):
            samples = rng.normal(scale=2.0, size=(10, 3))
            init = InitialState(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
            q1 = project_quintic(DiscreteTrajectory(times, samples), init)
            q2 = project_quintic(DiscreteTrajectory(times, q1.position(times)), init)
            np.testing.assert_allclose(q2.coeffs, q1.coeffs, atol=1e-9)


# 6 ------------------------------------------------------------------------------


def test_expert_label_validity():
    with criterion("expert-label-validity", 300.0):
        model = CollisionModel()
        for seed in range(20):
            sc = gen_forest(ForestSpec(seed=seed, intensity=1 / 25, clear_radius=1.5))
            cfg = ExpertConfig(seed=1000 + seed)
            lbl = label(sc, cfg, use_global=True)
            assert lbl.feasible, f"forest seed {seed}: no label"
            assert lbl.costs == sorted(lbl.costs)
            for traj, spline in zip(lbl.trajectories, lbl.splines):
                assert not in_collision(sc.cloud, model, traj)
                np.testing.assert_allclose(spline.evaluate(0.0)[0], sc.start.position,
                                           atol=1e-9)

        # symmetric single pole: the label set covers both avoidance sides
        sc = gen_pole(pole_distance=2.5)
        both = 0
        for seed in range(10):
            lbl = label(sc, ExpertConfig(seed=seed), use_global=False, speed=3.0)
            sides = set()
            for traj in lbl.trajectories:
                i = int(np.argmin(np.abs(traj.positions[:, 0] - 2.5)))
                y = traj.positions[i, 1]
                if abs(y) > 0.05:
                    sides.add(1 if y > 0 else -1)
            both += {1, -1} <= sides
        assert both >= 8, f"both-sides labels in only {both}/10 seeds"


# 7 ------------------------------------------------------------------------------


def test_desk_scale_forest_trends():
    with criterion("forest-sweep-trends", 1800.0):
        speeds = (3.0, 5.0, 7.0, 10.0)
        expert_cfg = RunConfig(policy="expert", expert_samples=2500,
                               speeds=speeds, n_seeds=10)
        rep = sweep("forest", expert_cfg, intensity=1 / 25, master_seed=0)
        rates = [rep.success_rate(v) for v in speeds]
        assert rates[0] == 1.0, f"expert at 3 m/s: {rates[0]:.0%} (want 100%)"
        assert all(a >= b for a, b in zip(rates, rates[1:])), f"not non-increasing: {rates}"

        blind_cfg = RunConfig(policy="blind", speeds=speeds, n_seeds=10)
        rep_b = sweep("forest", blind_cfg, intensity=1 / 25, master_seed=0)
        blind_rates = [rep_b.success_rate(v) for v in speeds]
        for v, r in zip(speeds, blind_rates):
            assert r <= 0.5, f"blind at {v} m/s: {r:.0%} (want <= 50%)"
        assert all(a >= b for a, b in zip(blind_rates, blind_rates[1:])), \
            f"blind rates not non-increasing: {blind_rates}"
        print(f"  expert rates: {rates}; blind rates: {blind_rates}")


# 8 ------------------------------------------------------------------------------


def test_global_plan_ablation_on_gap():
    with criterion("global-plan-ablation", 300.0):
        gap_y = 3.0
        sc = gen_gap_wall(GapWallSpec(lateral_offset=gap_y, gap_width=0.9))
        plan = global_plan(sc, speed=3.0)
        assert not plan.blocked
        d_global, d_local = [], []
        for seed in range(10):
            cfg = ExpertConfig(seed=seed)
            lg = label(sc, cfg, use_global=True, speed=3.0, plan=plan)
            ll = label(sc, cfg, use_global=False, speed=3.0)
            d_global += [abs(t.positions[-1, 1] - gap_y) for t in lg.trajectories]
            d_local += [abs(t.positions[-1, 1] - gap_y) for t in ll.trajectories]
        mg, ml = float(np.mean(d_global)), float(np.mean(d_local))
        assert mg < ml, f"global {mg:.3f} not closer to the gap than local {ml:.3f}"
        print(f"  lateral distance-to-gap at horizon end: global={mg:.3f} local={ml:.3f}")


# 9 ------------------------------------------------------------------------------


def test_subcommand_determinism(tmp_path, capsys):
    with criterion("cli-determinism", 120.0):
        rng = np.random.default_rng(3)
        labels_path = tmp_path / "labels.json"
        labels_path.write_text(json.dumps(rng.normal(size=(8, 10, 3)).tolist()))
        scen_dir = tmp_path / "scen"
        gen_forest(ForestSpec(seed=9, intensity=0.003)).save(scen_dir)

        def run_all(tag):
            d = tmp_path / tag
            d.mkdir()
            argvs = [
                ["gen-env", "--kind", "forest", "--seed", "2", "--density", "0.003",
                 "--out", str(d / "env")],
                ["plan", "--scenario", str(scen_dir / "scenario.json"), "--samples", "1000",
                 "--seed", "2", "--out", str(d / "label.json")],
                ["bench", "--env", "forest", "--policy", "blind", "--speeds", "3,5",
                 "--seeds", "2", "--seed", "2", "--out", str(d / "report.json")],
                ["feasibility", "--t-p", "10.3ms"],
                ["fit-rwta", "--labels", str(labels_path), "--modes", "2", "--steps", "50",
                 "--step-size", "0.005", "--seed", "2", "--out", str(d / "fit.json")],
            ]
            outs = []
            for argv in argvs:
                assert cli_main(argv) == 0
                outs.append(capsys.readouterr().out.replace(tag, "RUN"))
            return d, outs

        d1, o1 = run_all("run1")
        d2, o2 = run_all("run2")
        assert o1 == o2
        import os

        def tree(path):
            out = {}
            for root, _, files in os.walk(path):
                for f in files:
                    p = os.path.join(root, f)
                    out[os.path.relpath(p, path)] = open(p, "rb").read()
            return out

        t1, t2 = tree(d1), tree(d2)
        assert set(t1) == set(t2)
        for k in t1:
            assert t1[k] == t2[k], f"{k} not bit-identical across runs"
