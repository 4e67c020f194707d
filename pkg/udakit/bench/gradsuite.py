import logging
import numpy as np
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence
from udakit import divergences
from udakit.errors import ConfigError, NumericError
from udakit.algorithms.config import BNMConfig, CoralConfig, DANConfig, DANNConfig, DSANConfig, MethodConfig, SSRTConfig, SourceOnlyConfig
from udakit.algorithms.methods import build_objective
from udakit.algorithms.optim import TrainerState
from udakit.data.sampler import BatchPair
from udakit.divergences.kernel import KernelSpec
from udakit.models.bundle import init_bundle
from udakit.models.grl import GrlCoefficient, grl
from udakit.models.layer import LayerSpec
from udakit.ndgraph import ops
from udakit.ndgraph.gradcheck import KINK_MARGIN, Builder, GradCheckReport, check_gradients, kink_margin
from udakit.ndgraph.tape import Tape, Var
from udakit.ndgraph.tensor import Tensor


"""
有限差分梯度检验套件：覆盖每个算子、每个复合损失以及每个算法的训练目标，每项在若干随机实例上检验。
测试与bench gradcheck共用。
"""


logger = logging.getLogger(__name__)


INSTANCES = 20
MAX_ATTEMPTS = 50
BATCH = 6
CLASSES = 3
TINY_EF = LayerSpec((2, 6, 4))
TINY_H = LayerSpec((4, 3))
TINY_D = LayerSpec((4, 3, 1))


class Instance(NamedTuple):
    build: Builder
    inputs: Dict[str, np.ndarray]
    wrt: Optional[List[str]] = None
    numeric: Optional[Callable[[str, Dict[str, np.ndarray]], float]] = None
    margin: float = np.inf


Sampler = Callable[[np.random.Generator], Instance]


@dataclass
class CaseResult:
    name: str
    reports: List[GradCheckReport] = field(default_factory = list)
    resampled: int = 0


    @property
    def passed(self) -> bool:
        return bool(self.reports) and all(r.passed for r in self.reports)


    @property
    def worst(self) -> Optional[GradCheckReport]:
        return max(self.reports, key = lambda r: r.max_error) if self.reports else None


def weighted_sum(tape: Tape, y: Var, w: np.ndarray) -> Var:
    """
    用固定的随机权重把输出收缩为标量，使每个输出元素都参与检验。
    """
    return ops.reduce("sum", y * tape.constant(w))


def unary(fn: Callable[[Var], Var], low: float = -2.0, high: float = 2.0, shape = (4, 3)) -> Sampler:
    def sample(rng: np.random.Generator) -> Instance:
        x = rng.uniform(low, high, size = shape)
        w = rng.normal(size = fn(Tape().leaf(x)).shape)
        return Instance(lambda tape, v: weighted_sum(tape, fn(v["x"]), w), {"x": x})
    return sample


def binary(fn: Callable[[Var, Var], Var], shape_a = (4, 3), shape_b = (4, 3)) -> Sampler:
    def sample(rng: np.random.Generator) -> Instance:
        a = rng.normal(size = shape_a)
        b = rng.normal(size = shape_b)
        tape = Tape()
        w = rng.normal(size = fn(tape.leaf(a), tape.leaf(b)).shape)
        return Instance(lambda tape, v: weighted_sum(tape, fn(v["a"], v["b"]), w), {"a": a, "b": b})
    return sample


def scalar_loss(fn: Callable[..., Var], **shapes: Any) -> Sampler:
    def sample(rng: np.random.Generator) -> Instance:
        inputs = {k: rng.normal(size = s) for k, s in shapes.items()}
        return Instance(lambda tape, v: fn(**v), inputs)
    return sample


def sample_take_rows(rng: np.random.Generator) -> Instance:
    x = rng.normal(size = (5, 3))
    idx = rng.integers(0, 5, size = 7)
    w = rng.normal(size = (7, 3))
    return Instance(lambda tape, v: weighted_sum(tape, ops.take_rows(v["x"], idx), w), {"x": x})


def sample_stop_gradient(rng: np.random.Generator) -> Instance:
    x = rng.normal(size = (4, 3))
    w = rng.normal(size = (4, 3))
    frozen = x.copy()
    build = lambda tape, v: weighted_sum(tape, v["x"] * ops.stop_gradient(v["x"]), w)
    numeric = lambda key, p: float(np.sum(p["x"] * frozen * w))
    return Instance(build, {"x": x}, numeric = numeric)


def sample_grl(rng: np.random.Generator) -> Instance:
    x = rng.normal(size = (4, 3))
    w = rng.normal(size = (4, 3))
    c = float(rng.uniform(0.1, 2.0))
    build = lambda tape, v: weighted_sum(tape, grl(v["x"], GrlCoefficient(c)), w)
    numeric = lambda key, p: float(-c * np.sum(p["x"] * w))
    return Instance(build, {"x": x}, numeric = numeric)


def sample_clip(rng: np.random.Generator) -> Instance:
    return unary(lambda x: ops.clip(x, -1.0, 1.0))(rng)


def sample_domain_adv(rng: np.random.Generator) -> Instance:
    u = rng.normal(size = (2 * BATCH, 1))
    z = np.concatenate([np.ones(BATCH), np.zeros(BATCH)])
    return Instance(lambda tape, v: divergences.domain_adv_loss(ops.sigmoid(v["u"]), z), {"u": u})


def sample_cross_entropy(rng: np.random.Generator) -> Instance:
    logits = rng.normal(size = (BATCH, CLASSES))
    labels = rng.integers(0, CLASSES, size = BATCH)
    return Instance(lambda tape, v: divergences.cross_entropy(v["logits"], labels), {"logits": logits})


def sample_covariance(rng: np.random.Generator) -> Instance:
    x = rng.normal(size = (BATCH, 4))
    w = rng.normal(size = (4, 4))
    return Instance(lambda tape, v: weighted_sum(tape, divergences.covariance(v["x"]), w), {"x": x})


def sample_mmd(rng: np.random.Generator) -> Instance:
    x = rng.normal(size = (BATCH, 3))
    y = rng.normal(loc = 0.5, size = (BATCH + 2, 3))
    sigma = float(rng.uniform(0.5, 2.0))
    return Instance(lambda tape, v: divergences.mmd2(v["x"], v["y"], sigma), {"x": x, "y": y})


def sample_mk_mmd(rng: np.random.Generator) -> Instance:
    x = rng.normal(size = (BATCH, 3))
    y = rng.normal(loc = 0.5, size = (BATCH, 3))
    kernel = KernelSpec()
    sigmas = kernel.resolve(np.vstack([x, y]))
    return Instance(lambda tape, v: divergences.mk_mmd2(v["x"], v["y"], kernel, sigmas), {"x": x, "y": y})


def sample_lmmd(rng: np.random.Generator) -> Instance:
    x = rng.normal(size = (BATCH, 3))
    y = rng.normal(loc = 0.5, size = (BATCH, 3))
    ws = divergences.lmmd_weights(rng.integers(0, CLASSES, size = BATCH), CLASSES)
    logits = rng.normal(size = (BATCH, CLASSES))
    probs = np.exp(logits) / np.sum(np.exp(logits), axis = 1, keepdims = True)
    wt = divergences.lmmd_weights(probs, CLASSES)
    kernel = KernelSpec()
    sigmas = kernel.resolve(np.vstack([x, y]))
    return Instance(lambda tape, v: divergences.lmmd2(v["x"], v["y"], ws, wt, kernel, sigmas), {"x": x, "y": y})


def sample_nuclear(rng: np.random.Generator) -> Instance:
    a = rng.normal(size = (BATCH, CLASSES))
    margin = float(np.min(np.linalg.svd(a, compute_uv = False)))
    return Instance(lambda tape, v: divergences.nuclear_norm(v["a"]), {"a": a}, margin = margin)


def sample_bnm(rng: np.random.Generator) -> Instance:
    logits = rng.normal(size = (BATCH, CLASSES))
    return Instance(lambda tape, v: divergences.bnm_loss(ops.softmax_rows(v["logits"])), {"logits": logits})


def sample_kl(rng: np.random.Generator) -> Instance:
    a = rng.normal(size = (BATCH, CLASSES))
    b = rng.normal(size = (BATCH, CLASSES))
    return Instance(lambda tape, v: divergences.kl_div(ops.softmax_rows(v["a"]), ops.softmax_rows(v["b"])), {"a": a, "b": b})


def sample_sr(rng: np.random.Generator) -> Instance:
    a = 2.0 * rng.normal(size = (BATCH, CLASSES))
    b = a + 0.5 * rng.normal(size = (BATCH, CLASSES))
    omega = float(rng.uniform(0.0, 1.0))
    eps = 0.5
    frozen: Dict[str, Any] = {}


    def build(tape: Tape, v: Dict[str, Var]) -> Var:
        p, q = ops.softmax_rows(v["a"]), ops.softmax_rows(v["b"])
        filters = frozen.setdefault("filters", (divergences.confidence_filter(p, eps), divergences.confidence_filter(q, eps)))
        return divergences.sr_loss(p, q, omega, eps, filters)

    return Instance(build, {"a": a, "b": b})


def sample_entropy(rng: np.random.Generator) -> Instance:
    logits = rng.normal(size = (BATCH, CLASSES))
    return Instance(lambda tape, v: divergences.entropy_mean(ops.softmax_rows(v["logits"])), {"logits": logits})


def objective_sampler(cfg: MethodConfig, r: float = 0.8) -> Sampler:
    """
    一个算法训练目标的检验实例。判别器参数直接与总目标的差分比较；
    其余参数经过梯度反转层，与total - (1 + c)·A的差分比较，A为带权的对抗项。
    本步视为常量的量（带宽、目标域权重、扰动等）在基准点上取定。
    """
    def sample(rng: np.random.Generator) -> Instance:
        bundle = init_bundle(TINY_EF, TINY_H, TINY_D, int(rng.integers(2 ** 31)))
        params = {}
        for name, t in bundle.params.items():
            arr = t.data
            params[name] = arr + (rng.normal(scale = 0.1, size = arr.shape) if name.endswith(".bias") else 0.0)
        bundle.params = {k: Tensor(v) for k, v in params.items()}
        batch = BatchPair(Tensor(rng.normal(size = (BATCH, 2))), rng.integers(0, CLASSES, size = BATCH), Tensor(rng.normal(loc = 0.5, size = (BATCH, 2))), np.concatenate([np.ones(BATCH), np.zeros(BATCH)]))
        state = TrainerState(bundle, cfg.default_optimizer(), rng = np.random.default_rng(int(rng.integers(2 ** 31))))
        frozen: Dict[str, Any] = {}


        def run(tape: Tape, leaves: Dict[str, Var]):
            for name, v in leaves.items():
                tape.bind_parameter(name, v)
            return build_objective(cfg, tape, state, batch, frozen, r)


        def build(tape: Tape, leaves: Dict[str, Var]) -> Var:
            return run(tape, leaves).total


        def numeric(key: str, point: Dict[str, np.ndarray]) -> float:
            tape = Tape()
            obj = run(tape, {k: tape.leaf(v, requires_grad = False, name = k) for k, v in point.items()})
            value = obj.total.item()
            if not key.startswith("d."):
                value -= sum((1.0 + c) * a.item() for a, c in obj.reversed)
            return value

        return Instance(build, params, numeric = numeric)
    return sample


PRIMITIVES: Dict[str, Sampler] = {
    "matmul": binary(ops.matmul, (4, 3), (3, 5)),
    "transpose": unary(ops.transpose),
    "add": binary(lambda a, b: a + b),
    "sub": binary(lambda a, b: a - b),
    "mul": binary(lambda a, b: a * b),
    "scale": unary(lambda x: ops.scale(x, -1.7)),
    "relu": unary(ops.relu),
    "exp": unary(ops.exp),
    "log_clamped": unary(ops.log_clamped, 0.1, 2.0),
    "sigmoid": unary(ops.sigmoid),
    "clip": sample_clip,
    "softmax_rows": unary(ops.softmax_rows),
    "log_softmax_rows": unary(ops.log_softmax_rows),
    "sum": unary(lambda x: ops.reduce("sum", x)),
    "mean": unary(lambda x: ops.reduce("mean", x)),
    "frobenius_sq": unary(lambda x: ops.reduce("frobenius_sq", x)),
    "stop_gradient": sample_stop_gradient,
    "take_rows": sample_take_rows,
    "concat_rows": binary(ops.concat_rows, (4, 3), (2, 3)),
    "grl": sample_grl,
}


LOSSES: Dict[str, Sampler] = {
    "cross_entropy": sample_cross_entropy,
    "domain_adv_loss": sample_domain_adv,
    "covariance": sample_covariance,
    "coral_loss": scalar_loss(divergences.coral_loss, source_feats = (BATCH, 4), target_feats = (BATCH + 1, 4)),
    "mmd2": sample_mmd,
    "mk_mmd2": sample_mk_mmd,
    "lmmd2": sample_lmmd,
    "nuclear_norm": sample_nuclear,
    "bnm_loss": sample_bnm,
    "kl_div": sample_kl,
    "sr_loss": sample_sr,
    "entropy_mean": sample_entropy,
}


OBJECTIVES: Dict[str, Sampler] = {
    "objective:SourceOnly": objective_sampler(SourceOnlyConfig()),
    "objective:Coral": objective_sampler(CoralConfig()),
    "objective:DAN": objective_sampler(DANConfig()),
    "objective:DANN": objective_sampler(DANNConfig()),
    "objective:DSAN": objective_sampler(DSANConfig()),
    "objective:BNM": objective_sampler(BNMConfig()),
    "objective:SSRT": objective_sampler(SSRTConfig(eps = 0.4)),
}


CASES: Dict[str, Sampler] = {**PRIMITIVES, **LOSSES, **OBJECTIVES}


def instance_margin(inst: Instance) -> float:
    """
    在基准点上前向一次，取relu/clip输入的最近不可导距离与实例自身给出的距离中的较小者。
    """
    tape = Tape()
    leaves = {k: tape.leaf(v, name = k) for k, v in inst.inputs.items()}
    inst.build(tape, leaves)
    return min(kink_margin(tape), inst.margin)


def run_case(name: str, sample: Sampler, instances: int, rng: np.random.Generator) -> CaseResult:
    """
    在instances个随机实例上检验一项。落在不可导点附近的实例被丢弃重抽。
    """
    result = CaseResult(name)
    while len(result.reports) < instances:
        for _ in range(MAX_ATTEMPTS):
            inst = sample(rng)
            if instance_margin(inst) >= KINK_MARGIN:
                break
            result.resampled += 1
        else:
            raise NumericError("Gradient check '%s' could not draw an instance away from non-differentiable points in %d attempts." % (name, MAX_ATTEMPTS))
        result.reports.append(check_gradients(name, inst.build, inst.inputs, inst.wrt, inst.numeric))
    return result


def run_gradsuite(instances: int = INSTANCES, seed: int = 0, names: Optional[Sequence[str]] = None) -> List[CaseResult]:
    """
    运行梯度检验套件。
    @params:
        instances: int 每项的随机实例数
        seed: int 随机种子
        names: Sequence[str] 可选，只运行这些项
    @return:
        results: List[CaseResult] 每项的结果
    """
    rng = np.random.default_rng(seed)
    chosen = list(CASES) if names is None else list(names)
    results = []
    for name in chosen:
        if name not in CASES:
            raise ConfigError("Unknown gradient check case '%s'." % (name,))
        result = run_case(name, CASES[name], instances, rng)
        logger.debug("%s", result.worst)
        results.append(result)
    return results
