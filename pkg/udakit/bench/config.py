import json
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple
from udakit.errors import ConfigError
from udakit.algorithms.config import MethodConfig, OptimizerConfig, SourceOnlyConfig, parse_algorithm
from udakit.data.csv import load_csv
from udakit.data.dataset import Dataset
from udakit.data.shift import ShiftSpec, add_gaussian_noise, make_domain
from udakit.models.layer import LayerSpec


"""
基准测试的配置：JSON文件定义各个域、各个算法与训练超参数。未给出的字段取默认值，解析后的完整配置会回写到输出目录。
"""


DOMAIN_KINDS = ("synthetic", "csv")


@dataclass(frozen = True)
class DomainSpec:
    name: str
    kind: str = "synthetic"
    shift: Optional[ShiftSpec] = None
    path: str = ""
    label_column: Optional[str] = "label"
    class_count: int = 2
    noise_sigma: float = 0.0
    noise_seed: int = 0


    def __post_init__(self) -> None:
        """
        一个命名的域。
        @params:
            name: str 域名
            kind: str synthetic（由ShiftSpec生成）或csv（从文件读取）
            shift: ShiftSpec 合成域的设定
            path: str CSV文件路径
            label_column: str | None CSV标签列
            class_count: int CSV数据的类别数
            noise_sigma: float 读入后额外附加的高斯噪声
            noise_seed: int 附加噪声的种子
        """
        if not self.name:
            raise ConfigError("Every domain needs a name.")
        if self.kind not in DOMAIN_KINDS:
            raise ConfigError("Domain '%s' has unknown kind '%s', expected one of %s." % (self.name, self.kind, list(DOMAIN_KINDS)))
        if self.kind == "synthetic" and self.shift is None:
            raise ConfigError("Synthetic domain '%s' needs a shift spec." % (self.name,))
        if self.kind == "csv" and not self.path:
            raise ConfigError("CSV domain '%s' needs a path." % (self.name,))
        if self.noise_sigma < 0:
            raise ConfigError("Domain '%s' has a negative noise level." % (self.name,))


    def build(self) -> Dataset:
        """
        生成或读取该域的数据集。
        """
        if self.kind == "synthetic":
            d = make_domain(self.shift, self.name)
        else:
            d = load_csv(self.path, self.label_column, self.class_count, domain_tag = self.name)
        return add_gaussian_noise(d, self.noise_sigma, self.noise_seed)


    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == "synthetic":
            d["shift"] = self.shift.to_dict()
        else:
            d.update({"path": self.path, "label_column": self.label_column, "class_count": self.class_count})
        d.update({"noise_sigma": self.noise_sigma, "noise_seed": self.noise_seed})
        return d


    @classmethod
    def from_dict(cls, d: Dict[str, Any], shift_defaults: Optional[Dict[str, Any]] = None, base_dir: str = ".") -> "DomainSpec":
        d = dict(d)
        kind = d.pop("kind", "csv" if "path" in d else "synthetic")
        if kind == "synthetic":
            merged = dict(shift_defaults or {})
            merged.update(d.pop("shift", {}))
            d["shift"] = ShiftSpec.from_dict(merged)
        elif "path" in d and not os.path.isabs(d["path"]):
            d["path"] = os.path.join(base_dir, d["path"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("Unknown domain fields %s." % (sorted(unknown),))
        return cls(kind = kind, **d)


@dataclass(frozen = True)
class ModelConfig:
    ef_hidden: Tuple[int, ...] = (64, 32)
    h_hidden: Tuple[int, ...] = ()
    d_hidden: Tuple[int, ...] = (16,)


    def __post_init__(self) -> None:
        """
        三个网络的隐藏层宽度。默认e_f = [d, 64, 32]，h = [32, C]，D = [32, 16, 1]。
        """
        for name in ("ef_hidden", "h_hidden", "d_hidden"):
            object.__setattr__(self, name, tuple(int(w) for w in getattr(self, name)))
        if not self.ef_hidden:
            raise ConfigError("The feature extractor needs at least one layer width.")


    def layer_specs(self, in_dim: int, class_count: int) -> Tuple[LayerSpec, LayerSpec, LayerSpec]:
        """
        @params:
            in_dim: int 输入特征维数
            class_count: int 类别数
        @return:
            ef, h, d: LayerSpec 三个网络的宽度
        """
        feat = self.ef_hidden[-1]
        return LayerSpec((in_dim,) + self.ef_hidden), LayerSpec((feat,) + self.h_hidden + (class_count,)), LayerSpec((feat,) + self.d_hidden + (1,))


    def to_dict(self) -> Dict[str, Any]:
        return {"ef_hidden": list(self.ef_hidden), "h_hidden": list(self.h_hidden), "d_hidden": list(self.d_hidden)}


    @classmethod
    def from_dict(cls, d: Optional[Dict[str, Any]]) -> "ModelConfig":
        if d is None:
            return cls()
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("Unknown model fields %s." % (sorted(unknown),))
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass(frozen = True)
class TaskSpec:
    source: str = ""
    target: str = ""
    algorithm: MethodConfig = field(default_factory = SourceOnlyConfig)
    seeds: Tuple[int, ...] = (0,)
    epochs: int = 30
    iterations_per_epoch: int = 200
    batch_B: int = 16
    target_labeled_fraction: float = 0.0
    optimizer: Optional[OptimizerConfig] = None
    model: ModelConfig = field(default_factory = ModelConfig)


    def __post_init__(self) -> None:
        """
        一个源域→目标域任务。
        @params:
            source: str 源域名
            target: str 目标域名
            algorithm: AlgorithmConfig 算法
            seeds: Tuple[int] 随机种子
            epochs: int 训练轮数
            iterations_per_epoch: int 每轮的迭代次数
            batch_B: int 每个域的批大小B
            target_labeled_fraction: float 标签可见的目标域样本比例
            optimizer: OptimizerConfig | None 优化器，None时取该算法的默认值
            model: ModelConfig 网络宽度
        """
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.source and self.source == self.target:
            raise ConfigError("Source and target must differ, got '%s' twice." % (self.source,))
        if not self.seeds:
            raise ConfigError("A task needs at least one seed.")
        if self.epochs < 0 or self.iterations_per_epoch < 1 or self.batch_B < 1:
            raise ConfigError("Epochs must be non-negative; iterations and batch size must be positive.")
        if not 0.0 <= self.target_labeled_fraction <= 1.0:
            raise ConfigError("The labeled target fraction must lie in [0, 1], got %r." % (self.target_labeled_fraction,))


    @property
    def name(self) -> str:
        return "%s→%s" % (self.source, self.target)


    @property
    def slug(self) -> str:
        return "%s_to_%s" % (self.source, self.target)


    @property
    def resolved_optimizer(self) -> OptimizerConfig:
        return self.optimizer if self.optimizer is not None else self.algorithm.default_optimizer()


    @property
    def total_steps(self) -> int:
        return self.epochs * self.iterations_per_epoch


    def for_pair(self, source: str, target: str, algorithm: MethodConfig) -> "TaskSpec":
        return replace(self, source = source, target = target, algorithm = algorithm)


    def to_dict(self) -> Dict[str, Any]:
        return {
            "source": self.source,
            "target": self.target,
            "algorithm": self.algorithm.to_dict(),
            "seeds": list(self.seeds),
            "epochs": self.epochs,
            "iterations_per_epoch": self.iterations_per_epoch,
            "batch_B": self.batch_B,
            "target_labeled_fraction": self.target_labeled_fraction,
            "optimizer": self.resolved_optimizer.to_dict(),
            "model": self.model.to_dict(),
        }


TEMPLATE_FIELDS = ("seeds", "epochs", "iterations_per_epoch", "batch_B", "target_labeled_fraction")


@dataclass(frozen = True)
class BenchConfig:
    domains: Tuple[DomainSpec, ...]
    algorithms: Tuple[MethodConfig, ...]
    template: TaskSpec = field(default_factory = TaskSpec)
    workers: int = 1
    save_checkpoints: bool = False
    dump_embeddings: bool = False


    def __post_init__(self) -> None:
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.workers < 1:
            raise ConfigError("At least one worker is required, got %d." % (self.workers,))


    @classmethod
    def from_dict(cls, d: Dict[str, Any], base_dir: str = ".") -> "BenchConfig":
        """
        由JSON对象构造配置。
        @params:
            d: Dict 形如{"domains": [...], "algorithms": [...], "epochs": 30, ...}
            base_dir: str CSV相对路径的基准目录
        @return:
            cfg: BenchConfig 配置
        """
        known = {"domains", "algorithms", "shift_defaults", "optimizer", "model", "workers", "save_checkpoints", "dump_embeddings"} | set(TEMPLATE_FIELDS)
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown bench config fields %s." % (sorted(unknown),))
        if "domains" not in d:
            raise ConfigError("A bench config needs a 'domains' list.")
        domains = [DomainSpec.from_dict(x, d.get("shift_defaults"), base_dir) for x in d["domains"]]
        algorithms = [parse_algorithm(x) for x in d.get("algorithms", ["SourceOnly"])]
        template = TaskSpec(
            optimizer = OptimizerConfig.from_dict(d["optimizer"]) if d.get("optimizer") is not None else None,
            model = ModelConfig.from_dict(d.get("model")),
            **{k: d[k] for k in TEMPLATE_FIELDS if k in d},
        )
        return cls(domains, algorithms, template, int(d.get("workers", 1)), bool(d.get("save_checkpoints", False)), bool(d.get("dump_embeddings", False)))


    @classmethod
    def load(cls, path: str) -> "BenchConfig":
        with open(path, "r", encoding = "utf-8") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError("'%s' is not valid JSON: %s" % (path, e)) from None
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))


    def to_dict(self) -> Dict[str, Any]:
        """
        完整解析后的配置，所有默认值都已填入。
        """
        t = self.template
        return {
            "domains": [x.to_dict() for x in self.domains],
            "algorithms": [a.to_dict() for a in self.algorithms],
            "seeds": list(t.seeds),
            "epochs": t.epochs,
            "iterations_per_epoch": t.iterations_per_epoch,
            "batch_B": t.batch_B,
            "target_labeled_fraction": t.target_labeled_fraction,
            "optimizer": t.optimizer.to_dict() if t.optimizer is not None else None,
            "resolved_optimizers": {a.method: (t.optimizer or a.default_optimizer()).to_dict() for a in self.algorithms},
            "model": t.model.to_dict(),
            "workers": self.workers,
            "save_checkpoints": self.save_checkpoints,
            "dump_embeddings": self.dump_embeddings,
        }


    def dump(self, path: str) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok = True)
        with open(path, "w", encoding = "utf-8") as f:
            json.dump(self.to_dict(), f, indent = 2, ensure_ascii = False)
            f.write("\n")
