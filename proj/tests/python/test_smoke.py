import itertools
import json

import numpy as np
import pytest

import tnqmm


def test_probabilities_match_evaluate():
    m = tnqmm.random_model(tnqmm.Variant.CLPS, tnqmm.Constraint.PSD_SLICES, [2, 3, 2], 2, 2, seed=3)
    p = tnqmm.probabilities(m)
    assert p.shape == (2, 3, 2)
    assert abs(p.sum() - 1.0) < 1e-12
    z = tnqmm.partition_function(m)
    for x in itertools.product(range(2), range(3), range(2)):
        assert abs(tnqmm.evaluate(m, np.array(x)) / z - p[x]) < 1e-12


def test_json_round_trip():
    m = tnqmm.random_model(tnqmm.Variant.LPS, tnqmm.Constraint.PSD_SLICES, [2, 2], 2, 2, seed=1)
    back = tnqmm.SequenceModel.from_json(m.to_json())
    assert back == m
    assert json.loads(m.to_json())["variant"] == "lps"


def test_kraus_and_hmm_conversions():
    k = tnqmm.random_kraus_model(tnqmm.Topology.CHAIN, [2, 2, 2], 2, 2, seed=4)
    t = tnqmm.kraus_to_tensor(k)
    assert tnqmm.tv_distance(tnqmm.probabilities(t), tnqmm.kraus_probabilities(k)) < 1e-10
    assert tnqmm.tensor_to_kraus(t).completeness_residual() < 1e-8

    h = tnqmm.random_hmm(tnqmm.Topology.CIRCULAR, [2, 3, 2], 2, seed=5)
    c = tnqmm.chmm_to_cmps(h)
    assert tnqmm.tv_distance(tnqmm.probabilities(c), tnqmm.hmm_probabilities(h)) < 1e-12
    back, rank, residual = tnqmm.cmps_to_chmm(c)
    assert tnqmm.tv_distance(tnqmm.hmm_probabilities(back), tnqmm.hmm_probabilities(h)) < 1e-3


def test_sample_and_train():
    gen = tnqmm.random_model(tnqmm.Variant.CMPS, tnqmm.Constraint.NONNEGATIVE, [2, 2, 2], 2, seed=6)
    data = tnqmm.sample(gen, 300, seed=7)
    assert data.shape == (300, 3)
    model, report = tnqmm.train(tnqmm.Variant.MPS, data=data, dims=[2, 2, 2], rank=2, max_iterations=50,
                                restarts=1, learning_rates=[0.01, 0.1])
    assert model.satisfies_constraint(0.0)
    assert len(report["runs"]) == 2
    assert abs(tnqmm.nll(model, data) / 300 - report["best_nll"]) < 1e-12


def test_errors_are_typed():
    m = tnqmm.random_model(tnqmm.Variant.CMPS, tnqmm.Constraint.NONNEGATIVE, [2, 2], 2, seed=8)
    with pytest.raises(tnqmm.DimensionError):
        tnqmm.evaluate(m, np.array([0, 0, 0]))
    with pytest.raises(tnqmm.ConfigError):
        tnqmm.train(tnqmm.Variant.MPS, data=np.zeros((4, 2), dtype=int), rank=2, bogus=1)
    assert issubclass(tnqmm.ConversionError, tnqmm.Error)
