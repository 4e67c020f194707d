import logging
import os
import time
import numpy as np
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
from rich.progress import track
from sklearn.metrics import precision_recall_fscore_support
from tqdm import tqdm
from udakit.errors import ConfigError, ContractError, NumericError, TrainingError
from udakit.algorithms.config import MethodConfig, SSRTConfig, SourceOnlyConfig
from udakit.algorithms.methods import train_step
from udakit.algorithms.optim import TrainerState
from udakit.algorithms.safe import init_safe_training, safe_training_tick
from udakit.bench.config import TaskSpec
from udakit.bench.embed import dump_embeddings
from udakit.bench.report import ReportTable
from udakit.data.dataset import Dataset
from udakit.data.sampler import labeled_subset, sample_balanced_batch
from udakit.models.bundle import ModelBundle, init_bundle, predict_logits
from udakit.models.checkpoint import save_checkpoint
from udakit.monitor.runlog import RunLog


"""
任务的执行：对每个种子初始化模型、训练若干轮并在每轮后评估目标域准确率；任务矩阵覆盖所有有序域对。
"""


logger = logging.getLogger(__name__)


def evaluate(bundle: ModelBundle, d: Dataset) -> float:
    """
    准确率：argmax h(e_f(x)) == y的比例，平局取最小类别号。
    @params:
        bundle: ModelBundle 模型
        d: Dataset 带标签的数据集
    @return:
        acc: float 位于[0, 1]
    """
    if not d.has_labels:
        raise ContractError("Can't evaluate on the unlabeled domain '%s'." % (d.domain_tag,))
    pred = np.argmax(predict_logits(bundle, d.features.data), axis = 1)
    return float(np.mean(pred == d.labels))


def evaluate_metrics(bundle: ModelBundle, d: Dataset) -> Dict[str, float]:
    """
    准确率与宏平均的精确率、召回率、F1。
    """
    acc = evaluate(bundle, d)
    pred = np.argmax(predict_logits(bundle, d.features.data), axis = 1)
    p, r, f1, _ = precision_recall_fscore_support(d.labels, pred, labels = list(range(d.class_count)), average = "macro", zero_division = 0)
    return {"accuracy": acc, "precision": float(p), "recall": float(r), "f1": float(f1)}


@dataclass
class SeedResult:
    seed: int
    curve: List[float] = field(default_factory = list)
    failed: bool = False
    failure: str = ""
    failed_step: int = -1
    restores: int = 0
    metrics: Dict[str, float] = field(default_factory = dict)


    @property
    def best(self) -> float:
        return max(self.curve) if self.curve else float("nan")


    @property
    def final(self) -> float:
        return self.curve[-1] if self.curve else float("nan")


@dataclass
class TaskResult:
    """
    一个任务在全部种子上的结果。
    curve为成功种子的逐轮平均准确率，下标0为未训练时；wall_time（秒）不参与比较。
    """
    task: str
    algorithm: str
    curve: List[float]
    per_seed: List[SeedResult]
    wall_time: float = 0.0


    @property
    def best(self) -> float:
        return max(self.curve) if self.curve else float("nan")


    @property
    def final(self) -> float:
        return self.curve[-1] if self.curve else float("nan")


    @property
    def failed(self) -> bool:
        return all(s.failed for s in self.per_seed)


    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaskResult):
            return NotImplemented
        return (self.task, self.algorithm, self.curve, self.per_seed) == (other.task, other.algorithm, other.curve, other.per_seed)


def seed_streams(seed: int) -> Tuple[int, np.random.Generator, np.random.Generator, np.random.Generator]:
    """
    由一个种子派生四个互不相关的随机流：模型初始化、批次抽样、训练步内部、标签可见子集。
    """
    init_seq, batch_seq, trainer_seq, label_seq = np.random.SeedSequence(seed).spawn(4)
    return int(init_seq.generate_state(1)[0]), np.random.default_rng(batch_seq), np.random.default_rng(trainer_seq), np.random.default_rng(label_seq)


def run_seed(t: TaskSpec, source: Dataset, target: Dataset, seed: int, out_dir: Optional[str] = None, save_checkpoints: bool = False, embeddings: bool = False, progress: bool = False) -> SeedResult:
    """
    训练一个种子。
    @params:
        t: TaskSpec 任务
        source: Dataset 源域
        target: Dataset 目标域，需带标签用于评估
        seed: int 种子
        out_dir: str 可选，运行日志等文件的输出目录
        save_checkpoints: bool 是否保存最终检查点
        embeddings: bool 是否导出最终特征的二维投影
        progress: bool 是否显示逐轮进度条
    @return:
        result: SeedResult 该种子的结果
    """
    init_seed, batch_rng, trainer_rng, label_rng = seed_streams(seed)
    ef, h, d = t.model.layer_specs(source.dim, source.class_count)
    state = TrainerState(init_bundle(ef, h, d, init_seed), t.resolved_optimizer, total_steps = max(1, t.total_steps), rng = trainer_rng)
    cfg = t.algorithm
    safe = None
    if isinstance(cfg, SSRTConfig):
        safe = init_safe_training(state, cfg.T, cfg.ramp_length, cfg.collapse_ratio)
    labeled = labeled_subset(target, t.target_labeled_fraction, label_rng) if t.target_labeled_fraction > 0 else None
    result = SeedResult(seed, [evaluate(state.bundle, target)])
    runlog = RunLog("%s_%s_%d" % (cfg.method, t.slug, seed))
    try:
        for epoch in tqdm(range(t.epochs), desc = "%s %s seed %d" % (cfg.method, t.name, seed), disable = not progress):
            state.epoch = epoch
            for _ in range(t.iterations_per_epoch):
                batch = sample_balanced_batch(source, target, t.batch_B, batch_rng, labeled)
                state, record = train_step(cfg, state, batch, safe)
                runlog.record_step(record)
                if safe is not None:
                    safe, state, _ = safe_training_tick(safe, state, record.diversity)
            result.curve.append(evaluate(state.bundle, target))
    except (NumericError, TrainingError) as e:
        result.failed = True
        result.failure = str(e)
        result.failed_step = state.step
        logger.warning("%s on %s, seed %d failed at step %d: %s", cfg.method, t.name, seed, state.step, e)
    if safe is not None:
        result.restores = safe.restores
    result.metrics = evaluate_metrics(state.bundle, target)
    if out_dir is not None:
        runlog.write_csv(os.path.join(out_dir, "runlog_%s_%s_%d.csv" % (cfg.method, t.slug, seed)))
        if save_checkpoints:
            save_checkpoint(os.path.join(out_dir, "checkpoint_%s_%s_%d.npz" % (cfg.method, t.slug, seed)), state.bundle, state.buffers, state.rng.bit_generator.state, state.step, state.epoch)
        if embeddings:
            dump_embeddings(state.bundle, source, target, os.path.join(out_dir, "embeddings_%s_%s.csv" % (cfg.method, t.slug)))
    return result


def run_task(t: TaskSpec, source: Dataset, target: Dataset, out_dir: Optional[str] = None, save_checkpoints: bool = False, embeddings: bool = False, progress: bool = False) -> TaskResult:
    """
    在全部种子上运行一个任务。失败的种子被记录下来，其余种子继续。
    @params:
        t: TaskSpec 任务
        source: Dataset 源域
        target: Dataset 目标域
        out_dir: str 可选，输出目录
        save_checkpoints: bool 是否保存检查点
        embeddings: bool 是否为第一个种子导出特征投影
        progress: bool 是否显示进度条
    @return:
        result: TaskResult 任务结果
    """
    if source.dim != target.dim:
        raise ConfigError("Domains '%s' and '%s' have different widths %d and %d." % (source.domain_tag, target.domain_tag, source.dim, target.dim))
    if source.class_count != target.class_count:
        raise ConfigError("Domains '%s' and '%s' have different class counts." % (source.domain_tag, target.domain_tag))
    start = time.perf_counter()
    per_seed = [run_seed(t, source, target, s, out_dir, save_checkpoints, embeddings and i == 0, progress) for i, s in enumerate(t.seeds)]
    ok = [s.curve for s in per_seed if not s.failed]
    curve = [float(v) for v in np.mean(np.array(ok), axis = 0)] if ok else []
    return TaskResult(t.name, t.algorithm.method, curve, per_seed, time.perf_counter() - start)


def build_tasks(names: Sequence[str], algorithms: Sequence[MethodConfig], base: TaskSpec) -> List[TaskSpec]:
    """
    为每个有序域对与每个算法生成一个任务；SourceOnly总在最前。
    """
    if len(names) < 2:
        raise ConfigError("A task matrix needs at least 2 domains, got %d." % (len(names),))
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if list(names).count(n) > 1})
        raise ConfigError("Duplicate domain names %s." % (dup,))
    algorithms = list(algorithms)
    if not any(a.method == SourceOnlyConfig.method for a in algorithms):
        algorithms.insert(0, SourceOnlyConfig())
    return [base.for_pair(s, tg, a) for a in algorithms for s in names for tg in names if s != tg]


def run_task_args(args: Tuple) -> TaskResult:
    return run_task(*args)


def run_matrix(domains: Mapping[str, Dataset], algorithms: Sequence[MethodConfig], base: TaskSpec, workers: int = 1, out_dir: Optional[str] = None, save_checkpoints: bool = False, embeddings: bool = False):
    """
    运行任务矩阵。
    @params:
        domains: Mapping[str, Dataset] 按顺序排列的域
        algorithms: Sequence[AlgorithmConfig] 算法
        base: TaskSpec 任务模板，source与target被逐一替换
        workers: int 并行进程数
        out_dir: str 可选，输出目录
    @return:
        table: ReportTable 汇总表
        results: List[TaskResult] 按任务顺序排列的结果
    """
    names = list(domains.keys())
    tasks = build_tasks(names, algorithms, base)
    args = [(t, domains[t.source], domains[t.target], out_dir, save_checkpoints, embeddings, False) for t in tasks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers = workers) as pool:
            results = list(pool.map(run_task_args, args))
    else:
        results = [run_task_args(a) for a in track(args, description = "Running %d tasks" % (len(args),))]
    for r in results:
        if r.failed:
            logger.warning("Every seed of %s on %s failed", r.algorithm, r.task)
    return ReportTable.from_results(results), results
