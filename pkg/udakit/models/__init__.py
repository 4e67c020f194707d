from .layer import LayerSpec, glorot_uniform, mlp_forward
from .bundle import Features, ModelBundle, classify, discriminate, ef_forward, extract_features, init_bundle, predict_logits
from .grl import GradientReversal, GrlCoefficient, grl, ramp
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
