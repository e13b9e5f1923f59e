# ruff : noqa: F401
from dgnflow.layers.convolution import (
    GatLayer,
    GcnLayer,
    Linear,
    SgcProp,
    gat_attention,
    gat_forward,
    gcn_forward,
    sgc_forward,
)
from dgnflow.layers.layer import Layer, glorot_init
from dgnflow.layers.model import MODELS, Model
from dgnflow.layers.normalization import (
    NORMALIZERS,
    BatchNorm,
    DgnLayer,
    Identity,
    PairNorm,
    batch_norm,
    dgn_assign,
    dgn_forward,
    make_normalizer,
    pair_norm,
)
