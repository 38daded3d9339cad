import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--ptbxl-dir",
        action="store",
        default=None,
        help="directory with a full PTB-XL manifest.csv and signals/ (optional)",
    )


@pytest.fixture(scope="session")
def mini_pipeline():
    """A small trained fused model shared by explanation/service tests.

    Uses a reduced corpus and epoch budget; accuracy is irrelevant here,
    only structural validity (projected banks, provenance, fusion head).
    """
    from ecgproto.losses import LossConfig
    from ecgproto.pipeline import fit_fusion_stage, train_branch
    from ecgproto.synthetic import make_synthetic_split
    from ecgproto.taxonomy import Branch
    from ecgproto.training import TrainConfig

    split, tax = make_synthetic_split(n_train=64, n_val=24, n_test=24, seed=7)
    models = {}
    for name, branch in [("rhythm", Branch.RHYTHM), ("morph", Branch.MORPHOLOGY),
                         ("global", Branch.GLOBAL)]:
        cfg = TrainConfig(branch=name, extractor="tiny", per_class=2, max_epochs=3,
                          patience=2, batch_size=16, warmup_epochs=1,
                          projection_every=2, seed=11,
                          loss=LossConfig(lambda_clst=0.01, lambda_sep=0.001,
                                          lambda_div=0.5, lambda_cntrst=0.5))
        model, _ = train_branch(split, tax, branch, cfg)
        models[branch] = model
    fused, _ = fit_fusion_stage(models, split, tax, l1_lambda=1e-4, max_iters=800)
    return split, tax, fused
