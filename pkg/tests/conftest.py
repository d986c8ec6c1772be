import numpy as np
import pytest

from modules.cli.config import ExperimentConfig
from modules.data.generator import DatasetConfig, DomainSpec, generate_dataset
from modules.model.network import ModelConfig, build_model
from modules.numerics.tensor import reset_graph
from modules.trainer.adam import OptimizerConfig
from modules.trainer.train_loop import EarlyStopConfig
from modules.trainer.variants import Variant


def small_domains():
    # 15 per target class -> 11 train / 2 val / 2 test
    return [
        DomainSpec(domain_id=0, nuisance_offset=0.0, role="target", class_counts=[15, 15]),
        DomainSpec(domain_id=1, nuisance_offset=-1.0, role="source", class_counts=[40, 0]),
        DomainSpec(domain_id=2, nuisance_offset=1.0, role="source", class_counts=[0, 40]),
    ]


@pytest.fixture(autouse=True)
def fresh_graph():
    reset_graph()
    yield
    reset_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_dataset_config():
    return DatasetConfig(feature_dim=4, nuisance_dims=1, domains=small_domains(), seed=3)


@pytest.fixture
def small_samples(small_dataset_config):
    return generate_dataset(small_dataset_config)


@pytest.fixture
def small_model_config():
    return ModelConfig(input_dim=4, encoder_hidden=[8], latent_dim=4, seed=1)


@pytest.fixture
def small_model(small_model_config):
    return build_model(small_model_config)


@pytest.fixture
def tiny_experiment(tmp_path, small_dataset_config, small_model_config):
    return ExperimentConfig(
        dataset=small_dataset_config,
        model=small_model_config,
        optimizer=OptimizerConfig(lr_EC=1e-3, lr_O=2e-3),
        early_stop=EarlyStopConfig(patience=2, eval_interval=10, max_steps=40),
        variants=[Variant.L2I, Variant.VANILLA],
        n_runs=2,
        output_dir=str(tmp_path / "out"),
    ).validate()
