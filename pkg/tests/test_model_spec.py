"""Model documents, duration families and batch laws."""
import numpy as np
import pytest

from models.batch_model import FiniteBatch, GeometricBatch
from models.distributions import Deterministic, Erlang, Exponential, Hyperexponential2, Mixture, MixtureComponent
from models.model_spec import KernelEntry, ModelSpec, format_loc, load_model_spec
from services.errors import ModelValidationError
from services.queue_model import kernel_transform


def _document(row0=(0.9, 0.1), row1=(0.3, 0.7)):
    return {
        "lambda": 0.1,
        "N": 2,
        "G": [
            [{"weight": row0[0], "family": "exponential", "rate": 1.0}, {"weight": row0[1], "family": "erlang", "shape": 2, "rate": 3.0}],
            [{"weight": row1[0], "family": "deterministic", "value": 0.5}, {"weight": row1[1], "family": "exponential", "rate": 2.0}],
        ],
    }


class TestDurationFamilies:
    @pytest.mark.parametrize("entry,s,expected", [
        (KernelEntry(weight=1.0, duration=Exponential(rate=2.0)), 0.0, 1.0),
        (KernelEntry(weight=0.9, duration=Erlang(shape=2, rate=1.8)), 0.0, 0.9),
        (KernelEntry(weight=1.0, duration=Erlang(shape=2, rate=2.0)), 2.0, 0.25),
    ])
    def test_kernel_transform(self, entry, s, expected):
        assert complex(kernel_transform(entry, s)).real == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("duration", [
        Exponential(rate=1.5),
        Erlang(shape=3, rate=2.0),
        Deterministic(value=0.7),
        Hyperexponential2(p=0.3, rate1=0.5, rate2=4.0),
        Mixture(components=[
            MixtureComponent(weight=0.4, distribution=Exponential(rate=1.0)),
            MixtureComponent(weight=0.6, distribution=Erlang(shape=2, rate=5.0)),
        ]),
    ])
    def test_moments_match_transform_derivatives(self, duration):
        # -L'(0) = E[T] and L''(0) = E[T^2], the latter by a central difference of L'
        h = 1e-5
        assert -complex(duration.transform_derivative(0.0)).real == pytest.approx(duration.mean(), rel=1e-12)
        second = (complex(duration.transform_derivative(h)).real - complex(duration.transform_derivative(-h)).real) / (2 * h)
        assert second == pytest.approx(duration.second_moment(), rel=1e-6)

    def test_erlang_sampler_mean(self):
        class Stream:
            rng = np.random.default_rng(7)

            def exponential(self):
                return float(self.rng.standard_exponential())

            def uniform(self):
                return float(self.rng.random())

        stream = Stream()
        duration = Erlang(shape=2, rate=4.0)
        draws = [duration.draw(stream) for _ in range(20000)]
        assert np.mean(draws) == pytest.approx(0.5, rel=0.03)


class TestBatchLaws:
    def test_single_arrivals(self):
        batch = FiniteBatch()
        assert complex(batch.pgf(0.3)) == pytest.approx(0.3)
        assert batch.mean() == 1.0
        assert batch.second_moment() == 1.0

    def test_finite_moments(self):
        batch = FiniteBatch(pmf=[0.5, 0.0, 0.5])
        assert batch.mean() == pytest.approx(2.0)
        assert batch.second_moment() == pytest.approx(5.0)
        assert complex(batch.pgf_derivative(1.0)).real == pytest.approx(2.0)

    def test_geometric_moments(self):
        batch = GeometricBatch(p=0.5)
        assert batch.mean() == pytest.approx(2.0)
        assert batch.second_moment() == pytest.approx(6.0)
        assert complex(batch.pgf(1.0)).real == pytest.approx(1.0)

    def test_pmf_must_sum_to_one(self):
        with pytest.raises(ValueError):
            FiniteBatch(pmf=[0.5, 0.4])


class TestModelValidation:
    def test_flat_family_shorthand(self):
        model = load_model_spec(_document())
        assert model.lam == 0.1
        assert isinstance(model.G[0][1].duration, Erlang)
        np.testing.assert_allclose(model.routing_matrix(), [[0.9, 0.1], [0.3, 0.7]])

    def test_gstar_defaults_to_g(self):
        model = load_model_spec(_document())
        assert model.Gstar == model.G
        np.testing.assert_array_equal(model.routing_matrix(exceptional=True), model.routing_matrix())

    def test_row_sum_reports_path(self):
        with pytest.raises(ModelValidationError) as excinfo:
            load_model_spec(_document(row0=(0.8, 0.1)))
        assert excinfo.value.path == "G[0]"

    def test_nested_field_reports_path(self):
        document = _document()
        document["G"][1][1]["rate"] = -1.0
        with pytest.raises(ModelValidationError) as excinfo:
            load_model_spec(document)
        assert excinfo.value.path == "G[1][1].duration.rate"

    def test_reducible_routing_rejected(self):
        with pytest.raises(ModelValidationError) as excinfo:
            load_model_spec(_document(row0=(1.0, 0.0), row1=(0.0, 1.0)))
        assert excinfo.value.path == "G"

    def test_lambda_must_be_positive(self):
        document = _document()
        document["lambda"] = 0.0
        with pytest.raises(ModelValidationError) as excinfo:
            load_model_spec(document)
        assert excinfo.value.path == "lambda"

    def test_document_round_trip_keeps_fingerprint(self):
        model = load_model_spec(_document())
        again = load_model_spec(model.document())
        assert again.fingerprint() == model.fingerprint()
        assert model.with_rate(0.2).fingerprint() != model.fingerprint()

    def test_format_loc_drops_discriminator_tags(self):
        assert format_loc(("G", 0, 1, "duration", "erlang", "rate")) == "G[0][1].duration.rate"
        assert format_loc(("batch", "finite", "pmf")) == "batch.pmf"

    def test_model_spec_is_frozen(self):
        model = ModelSpec(lam=1.0, N=1, G=[[KernelEntry(weight=1.0, duration=Exponential(rate=2.0))]])
        with pytest.raises(Exception):
            model.lam = 2.0
