import numpy as np
from dataclasses import dataclass
from typing import Any, Dict, NamedTuple, Optional, Tuple, Type
from udakit.errors import ConfigError, NumericError, TrainingError
from udakit.algorithms.config import BNMConfig, CoralConfig, DANConfig, DANNConfig, DSANConfig, MethodConfig, SSRTConfig, SourceOnlyConfig
from udakit.algorithms.optim import TrainerState, lr_at, sgd_step
from udakit.algorithms.safe import SafeTrainingState, diversity, r_schedule
from udakit.data.sampler import BatchPair
from udakit import divergences
from udakit.models.bundle import ModelBundle, classify, discriminate, ef_forward, predict_logits
from udakit.models.grl import grl, ramp
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Tape, Var


"""
各算法的训练目标与单步训练。
目标函数都是ℓ_CE加上按权重叠加的自适应项；对抗项经过梯度反转层，直接最小化总目标即可实现极小极大。
"""


class Objective(NamedTuple):
    total: Var
    ce: Var
    adapt: Optional[Var] = None
    sr: Optional[Var] = None
    reversed: Tuple[Tuple[Var, float], ...] = ()
    target_logits: Optional[Var] = None


@dataclass(frozen = True)
class LossRecord:
    step: int
    epoch: int
    lr: float
    total: float
    ce: float
    adapt: float
    sr: float
    r: float
    diversity: int


    COLUMNS = ("step", "epoch", "lr", "total", "ce", "adapt", "sr", "r", "diversity")


    def as_row(self) -> Tuple[Any, ...]:
        return tuple(getattr(self, c) for c in self.COLUMNS)


def value_of(v: Optional[Var]) -> float:
    return v.item() if v is not None else 0.0


class Algorithm:
    """
    一个算法即一个训练目标。子类实现objective()。
    frozen中存放本步里被视为常量、由前向值决定的量（带宽、目标域权重、扰动等），
    同一步内重复构建目标时沿用首次的取值。
    """
    config_class: Type[MethodConfig] = MethodConfig


    def __init__(self, cfg: MethodConfig) -> None:
        if not isinstance(cfg, self.config_class):
            raise ConfigError("%s expects a %s, got %s." % (self.__class__.__name__, self.config_class.__name__, cfg.__class__.__name__))
        self.cfg = cfg


    def weight(self, lam: float, use_ramp: bool, progress: float) -> float:
        return lam * ramp(progress) if use_ramp else lam


    def source_terms(self, tape: Tape, m: ModelBundle, batch: BatchPair) -> Tuple[Var, Var]:
        """
        源域前向传播与交叉熵。
        @return:
            fs: Var 源域特征
            ce: Var 交叉熵
        """
        fs = ef_forward(m, tape.constant(batch.xs)).features
        return fs, divergences.cross_entropy(classify(m, fs), batch.ys)


    def target_terms(self, tape: Tape, m: ModelBundle, batch: BatchPair) -> Tuple[Var, Var]:
        ft = ef_forward(m, tape.constant(batch.xt)).features
        return ft, classify(m, ft)


    def supervised_target(self, ce: Var, logits_t: Optional[Var], batch: BatchPair) -> Var:
        """
        半监督设定：批次中带标签的目标域样本也计入交叉熵。
        """
        if batch.yt_labeled is None or logits_t is None:
            return ce
        idx, labels = batch.yt_labeled
        return ce + divergences.cross_entropy(ops.take_rows(logits_t, idx), labels)


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        raise NotImplementedError


class SourceOnly(Algorithm):
    config_class = SourceOnlyConfig


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        m = state.bundle
        fs, ce = self.source_terms(tape, m, batch)
        logits_t = None
        if batch.yt_labeled is not None:
            logits_t = self.target_terms(tape, m, batch)[1]
            ce = self.supervised_target(ce, logits_t, batch)
        return Objective(ce, ce, target_logits = logits_t)


class Coral(Algorithm):
    config_class = CoralConfig


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        m = state.bundle
        fs, ce = self.source_terms(tape, m, batch)
        ft, logits_t = self.target_terms(tape, m, batch)
        ce = self.supervised_target(ce, logits_t, batch)
        adapt = divergences.coral_loss(fs, ft)
        total = ce + ops.scale(adapt, self.weight(self.cfg.lam, self.cfg.ramp, state.progress))
        return Objective(total, ce, adapt, target_logits = logits_t)


class DAN(Algorithm):
    config_class = DANConfig


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        m = state.bundle
        fs, ce = self.source_terms(tape, m, batch)
        ft, logits_t = self.target_terms(tape, m, batch)
        ce = self.supervised_target(ce, logits_t, batch)
        sigmas = frozen.setdefault("sigmas", self.cfg.kernel.resolve(np.vstack([fs.value.data, ft.value.data])))
        adapt = divergences.mk_mmd2(fs, ft, self.cfg.kernel, sigmas)
        total = ce + ops.scale(adapt, self.weight(self.cfg.lam, self.cfg.ramp, state.progress))
        return Objective(total, ce, adapt, target_logits = logits_t)


class DANN(Algorithm):
    config_class = DANNConfig


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        m = state.bundle
        fs, ce = self.source_terms(tape, m, batch)
        ft, logits_t = self.target_terms(tape, m, batch)
        ce = self.supervised_target(ce, logits_t, batch)
        coeff = self.cfg.grl.at(state.progress)
        d_out = discriminate(m, grl(ops.concat_rows(fs, ft), self.cfg.grl, state.progress))
        adapt = divergences.domain_adv_loss(d_out, batch.z)
        weighted = ops.scale(adapt, self.cfg.lam)
        return Objective(ce + weighted, ce, adapt, reversed = ((weighted, coeff),), target_logits = logits_t)


class DSAN(Algorithm):
    config_class = DSANConfig


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        m = state.bundle
        fs, ce = self.source_terms(tape, m, batch)
        ft, logits_t = self.target_terms(tape, m, batch)
        ce = self.supervised_target(ce, logits_t, batch)
        c = m.class_count
        probs_t = ops.softmax_rows(logits_t)
        wt = frozen.setdefault("target_weights", divergences.lmmd_weights(probs_t.value.numpy(), c))
        ws = divergences.lmmd_weights(batch.ys, c)
        sigmas = frozen.setdefault("sigmas", self.cfg.kernel.resolve(np.vstack([fs.value.data, ft.value.data])))
        adapt = divergences.lmmd2(fs, ft, ws, wt, self.cfg.kernel, sigmas)
        total = ce + ops.scale(adapt, self.weight(self.cfg.lam, self.cfg.ramp, state.progress))
        return Objective(total, ce, adapt, target_logits = logits_t)


class BNM(Algorithm):
    config_class = BNMConfig


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        m = state.bundle
        fs, ce = self.source_terms(tape, m, batch)
        ft, logits_t = self.target_terms(tape, m, batch)
        ce = self.supervised_target(ce, logits_t, batch)
        adapt = divergences.bnm_loss(ops.softmax_rows(logits_t))
        total = ce + ops.scale(adapt, self.weight(self.cfg.lam, self.cfg.ramp, state.progress))
        return Objective(total, ce, adapt, target_logits = logits_t)


class SSRT(Algorithm):
    config_class = SSRTConfig


    def objective(self, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Dict[str, Any], r: float = 1.0) -> Objective:
        """
        ℓ_CE + α_r·ℓ_d（经梯度反转层） + β_r·ℓ_SR，其中α_r = rα，β_r = rβ。
        扰动分支在第perturb_layer个隐藏层上取b̄ = b + λ·[b_r - b]×，b_r为批次内随机置换后的b，[·]×不回传梯度。
        """
        cfg = self.cfg
        m = state.bundle
        if cfg.perturb_layer >= m.ef.depth - 1:
            raise ConfigError("Can't perturb hidden layer %d of a feature extractor with %d hidden layers." % (cfg.perturb_layer, m.ef.depth - 1))
        fs, ce = self.source_terms(tape, m, batch)
        ft, logits_t = self.target_terms(tape, m, batch)
        ce = self.supervised_target(ce, logits_t, batch)
        coeff = cfg.grl.at(state.progress)
        d_out = discriminate(m, grl(ops.concat_rows(fs, ft), cfg.grl, state.progress))
        adapt = divergences.domain_adv_loss(d_out, batch.z)
        weighted = ops.scale(adapt, r * cfg.alpha)
        if "lambda" not in frozen:
            frozen["lambda"] = float(state.rng.uniform(0.0, cfg.lambda_max))
            frozen["perm"] = state.rng.permutation(batch.size)
        lam = frozen["lambda"]


        def perturb(layer: int, pre: Var) -> Var:
            if layer != cfg.perturb_layer:
                return pre
            if "offset" in frozen:
                offset = tape.constant(frozen["offset"])
            else:
                offset = ops.stop_gradient(ops.take_rows(pre, frozen["perm"]) - pre)
                frozen["offset"] = offset.value.numpy()
            return pre + ops.scale(offset, lam)


        ft_tilde = ef_forward(m, tape.constant(batch.xt), perturb).features
        p = ops.softmax_rows(logits_t)
        p_tilde = ops.softmax_rows(classify(m, ft_tilde))
        filters = frozen.setdefault("filters", (divergences.confidence_filter(p, cfg.eps), divergences.confidence_filter(p_tilde, cfg.eps)))
        sr = divergences.sr_loss(p, p_tilde, cfg.omega, cfg.eps, filters)
        total = ce + weighted + ops.scale(sr, r * cfg.beta)
        return Objective(total, ce, adapt, sr, reversed = ((weighted, coeff),), target_logits = logits_t)


ALGORITHMS: Dict[str, Type[Algorithm]] = {a.config_class.method: a for a in (SourceOnly, Coral, DAN, DANN, DSAN, BNM, SSRT)}


def get_algorithm_class(name: str) -> Type[Algorithm]:
    """
    按方法名取得算法类。
    """
    if name not in ALGORITHMS:
        raise ConfigError("Algorithm not found: %s" % (name,))
    return ALGORITHMS[name]


def build_objective(cfg: MethodConfig, tape: Tape, state: TrainerState, batch: BatchPair, frozen: Optional[Dict[str, Any]] = None, r: float = 1.0) -> Objective:
    """
    在给定磁带上构建一步的训练目标。
    """
    return get_algorithm_class(cfg.method)(cfg).objective(tape, state, batch, {} if frozen is None else frozen, r)


def train_step(cfg: MethodConfig, state: TrainerState, batch: BatchPair, safe: Optional[SafeTrainingState] = None) -> Tuple[TrainerState, LossRecord]:
    """
    单步训练：构建目标、反向传播、SGD更新。目标或梯度非有限时抛出异常，参数、步数与随机数状态都不变。
    @params:
        cfg: AlgorithmConfig 算法配置
        state: TrainerState 训练器状态
        batch: BatchPair 批次
        safe: SafeTrainingState 可选，安全训练状态，决定r
    @return:
        state: TrainerState 更新后的状态
        record: LossRecord 本步的损失分解
    """
    opt = state.optimizer
    lr = lr_at(opt.lr0, state.progress, opt.gamma, opt.decay)
    r = r_schedule(safe, state.step) if safe is not None else 1.0
    rng_state = state.rng.bit_generator.state
    try:
        tape = Tape()
        obj = build_objective(cfg, tape, state, batch, {}, r)
        total = obj.total.item()
        if not np.isfinite(total):
            raise NumericError("Composite loss of %s is not finite at step %d." % (cfg.method, state.step))
        grads = tape.backward(obj.total).parameters()
        if obj.target_logits is not None:
            div = diversity(obj.target_logits.value)
        else:
            div = diversity(predict_logits(state.bundle, batch.xt.data))
        sgd_step(state, grads, lr)
    except (NumericError, TrainingError):
        state.rng.bit_generator.state = rng_state
        raise
    record = LossRecord(state.step, state.epoch, lr, total, obj.ce.item(), value_of(obj.adapt), value_of(obj.sr), r, div)
    state.step += 1
    return state, record
