"""Smoke tests for the python bindings: the main operations end to end."""

import math

import pytest

import fedawa


def test_tensor_ops():
    layout = fedawa.LayerLayout([("w", 2)])
    a = fedawa.ParamVector([3.0, 4.0], layout)
    b = fedawa.ParamVector([1.0, 0.0], layout)
    assert fedawa.dot(a, b) == 3.0
    assert fedawa.l2_norm(a) == 5.0
    assert fedawa.cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-12)
    assert fedawa.axpy(2.0, b, a).values == [5.0, 4.0]


def test_blobs_and_partition():
    ds = fedawa.gen_blobs(4, 8, 25, 1.0, seed=7)
    assert ds.n == 100
    assert ds.dim == 8
    parts = fedawa.dirichlet_partition(ds.labels, alpha=0.5, clients=5, seed=3)
    assert len(parts) == 5
    covered = sorted(i for p in parts for i in p.indices)
    assert covered == list(range(100))
    hist = fedawa.label_histogram(ds, parts[0])
    assert sum(hist.counts) == len(parts[0])
    assert sum(hist.normalized) == pytest.approx(1.0, abs=1e-12)


def test_weight_rules_stay_on_the_simplex():
    w = fedawa.fedavg_weights([100, 300])
    assert w.lambda_ == [0.25, 0.75]

    layout = fedawa.LayerLayout([("w", 3)])
    theta_g = fedawa.ParamVector([1.0, 1.0, 1.0], layout)
    thetas = [
        fedawa.ParamVector([2.0, 1.0, 1.0], layout),
        fedawa.ParamVector([1.0, 2.0, 1.0], layout),
    ]
    taus = [fedawa.client_vector(t, theta_g, k, 1) for k, t in enumerate(thetas)]
    for rule in (
        fedawa.ldawa_weights(thetas, theta_g),
        fedawa.awa_cos_weights(taus, fedawa.AggWeights([0.5, 0.5])),
    ):
        assert all(v >= 0.0 for v in rule.lambda_)
        assert sum(rule.lambda_) == pytest.approx(1.0, abs=1e-9)


def test_optimize_weights_improves_the_objective():
    layout = fedawa.LayerLayout([("w", 3)])
    theta_g = fedawa.ParamVector([1.0, 1.0, 1.0], layout)
    taus = [
        fedawa.client_vector(fedawa.ParamVector([2.0, 1.0, 1.0], layout), theta_g, 0, 1),
        fedawa.client_vector(fedawa.ParamVector([1.9, 1.1, 1.0], layout), theta_g, 1, 1),
    ]
    thetas = [fedawa.ParamVector([2.0, 1.0, 1.0], layout), fedawa.ParamVector([1.9, 1.1, 1.0], layout)]
    w0 = fedawa.AggWeights([0.5, 0.5])
    before = fedawa.awa_objective(w0, taus, thetas, theta_g)
    weights, trace = fedawa.optimize_weights(taus, thetas, theta_g, w0, steps=2000, step_size=0.05)
    after = fedawa.awa_objective(weights, taus, thetas, theta_g)
    assert after <= before
    assert after == pytest.approx(min(trace), abs=1e-9)
    assert sum(weights.lambda_) == pytest.approx(1.0, abs=1e-9)


def test_ot_distance_is_total_variation_under_unit_cost():
    p = fedawa.LabelHistogram([8, 2])
    q = fedawa.LabelHistogram([3, 7])
    cost = fedawa.uniform_cost(2)
    assert fedawa.ot_distance(p, q, cost) == pytest.approx(0.5, abs=1e-12)
    sims = fedawa.dataset_vector([p, q], q, cost)
    assert sims[1] == pytest.approx(1.0, abs=1e-12)
    assert sims[0] == pytest.approx(1.0 / 1.5, abs=1e-12)


CONFIG = """
[run]
strategy = "fedawa"
rounds = 3
clients = 4
master_seed = 9
[data]
classes = 3
dims = 6
samples_per_class = 30
test_samples_per_class = 10
alpha = 1.0
[model]
layers = [6, 8, 3]
"""


def test_run_experiment_roundtrips_the_cli_config():
    records, model = fedawa.run_experiment(CONFIG)
    assert len(records) == 3
    for r in records:
        assert 0.0 <= r["accuracy"] <= 1.0
        assert len(r["lambda"]) == 4
        assert sum(r["lambda"]) == pytest.approx(1.0, abs=1e-9)
    assert len(model) == 6 * 8 + 8 + 8 * 3 + 3

    again, model2 = fedawa.run_experiment(CONFIG)
    assert [r["accuracy"] for r in records] == [r["accuracy"] for r in again]
    assert model.values == model2.values


def test_config_tooling():
    schema = fedawa.config_schema()
    assert "[run]" in schema and "strategy" in schema
    canonical = fedawa.canonical_config(CONFIG)
    assert fedawa.canonical_config(canonical) == canonical
    assert len(fedawa.config_hash(CONFIG)) == 16
    with pytest.raises(ValueError):
        fedawa.run_experiment('[run]\nstrategy = "fedmagic"\n')


def test_distance_matrix_and_trajectory():
    layout = fedawa.LayerLayout([("w", 2)])
    vs = [fedawa.ParamVector(v, layout) for v in ([1.0, 0.0], [0.0, 1.0], [-1.0, 0.0])]
    m = fedawa.vector_distance_matrix(vs)
    assert m[0][1] == pytest.approx(1.0, abs=1e-12)
    assert m[0][2] == pytest.approx(2.0, abs=1e-12)
    assert m[1][0] == m[0][1]
    assert math.isclose(
        fedawa.weight_trajectory_similarity([[0.6, 0.4]], [0.6, 0.4])[0], 1.0, abs_tol=1e-12
    )
