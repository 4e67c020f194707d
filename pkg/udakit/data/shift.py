import zlib
import numpy as np
from dataclasses import asdict, dataclass
from sklearn.datasets import make_blobs, make_moons
from typing import Any, Dict, Tuple
from udakit.errors import ConfigError
from udakit.data.dataset import Dataset
from udakit.ndgraph.tensor import Tensor


"""
合成的域偏移数据集：在基准分布上依次施加旋转（绕原点，作用于第0、1维）、平移与高斯噪声。
所有生成器都是(spec, seed)的纯函数。
"""


BASES = ("two_moons", "gaussian_blobs")
SOURCE_SALT = 0x5EED0001
TARGET_SALT = 0x5EED0002
MOON_CENTRE = np.array([0.5, 0.25])
BLOB_RADIUS = 2.0
BLOB_STD = 0.5


@dataclass(frozen = True)
class ShiftSpec:
    base: str = "two_moons"
    n_per_domain: int = 500
    rotation_deg: float = 0.0
    translation: Tuple[float, ...] = ()
    noise_sigma: float = 0.0
    class_count: int = 2
    seed: int = 0
    dim: int = 2
    jitter: float = 0.1
    source_noise_sigma: float = 0.0


    def __post_init__(self) -> None:
        """
        域偏移的设定。
        @params:
            base: str 基准分布，two_moons或gaussian_blobs
            n_per_domain: int 每个域的样本数
            rotation_deg: float 旋转角度（度）
            translation: Tuple[float] 平移向量，空则为零
            noise_sigma: float 目标域附加高斯噪声的标准差
            class_count: int 类别数C
            seed: int 随机种子
            dim: int 特征维数，至少为2
            jitter: float 双月数据自身的抖动
            source_noise_sigma: float 源域附加高斯噪声的标准差
        """
        object.__setattr__(self, "translation", tuple(float(t) for t in self.translation))
        if self.base not in BASES:
            raise ConfigError("Unsupported base distribution '%s', expected one of %s." % (self.base, list(BASES)))
        if self.n_per_domain < 1:
            raise ConfigError("Each domain needs at least one sample, got %d." % (self.n_per_domain,))
        if self.noise_sigma < 0 or self.source_noise_sigma < 0 or self.jitter < 0:
            raise ConfigError("Noise levels must be non-negative.")
        if self.class_count < 2:
            raise ConfigError("A shift spec needs at least 2 classes, got %d." % (self.class_count,))
        if self.base == "two_moons" and self.class_count != 2:
            raise ConfigError("Two moons always has 2 classes, got %d." % (self.class_count,))
        if self.dim < 2:
            raise ConfigError("Synthetic features need at least 2 dimensions, got %d." % (self.dim,))
        if self.translation and len(self.translation) != self.dim:
            raise ConfigError("Translation has %d entries for %d dimensions." % (len(self.translation), self.dim))
        if self.seed < 0:
            raise ConfigError("Seeds must be non-negative, got %d." % (self.seed,))


    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["translation"] = list(self.translation)
        return d


    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ShiftSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("Unknown shift fields %s." % (sorted(unknown),))
        return cls(**d)


def draw_base(spec: ShiftSpec, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    从基准分布中采样。
    @params:
        spec: ShiftSpec 设定
        seed: int 该域的种子
    @return:
        x: np.ndarray 形状为[n, dim]
        y: np.ndarray 标签
    """
    state = np.random.RandomState(np.random.MT19937(seed))
    n = spec.n_per_domain
    if spec.base == "two_moons":
        xy, y = make_moons(n_samples = n, noise = spec.jitter, random_state = state)
        x = np.zeros((n, spec.dim))
        x[:, :2] = xy - MOON_CENTRE
        if spec.dim > 2:
            x[:, 2:] = state.normal(0.0, spec.jitter, size = (n, spec.dim - 2))
        return x, y.astype(np.int64)
    angles = 2.0 * np.pi * np.arange(spec.class_count) / spec.class_count
    centres = np.zeros((spec.class_count, spec.dim))
    centres[:, 0] = BLOB_RADIUS * np.cos(angles)
    centres[:, 1] = BLOB_RADIUS * np.sin(angles)
    x, y = make_blobs(n_samples = n, centers = centres, cluster_std = BLOB_STD, random_state = state)
    return x, y.astype(np.int64)


def rotate(x: np.ndarray, degrees: float) -> np.ndarray:
    """
    在第0、1维构成的平面内绕原点旋转。
    """
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    out = x.copy()
    out[:, 0] = c * x[:, 0] - s * x[:, 1]
    out[:, 1] = s * x[:, 0] + c * x[:, 1]
    return out


def apply_shift(x: np.ndarray, spec: ShiftSpec, rng: np.random.Generator) -> np.ndarray:
    """
    依次施加旋转、平移与噪声。
    """
    out = rotate(x, spec.rotation_deg) if spec.rotation_deg != 0 else x.copy()
    if spec.translation:
        out = out + np.asarray(spec.translation)
    if spec.noise_sigma > 0:
        out = out + rng.normal(0.0, spec.noise_sigma, size = out.shape)
    return out


def domain_streams(seed: int) -> Tuple[int, np.random.Generator]:
    base_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    return int(base_seq.generate_state(1)[0]), np.random.default_rng(noise_seq)


def make_domain(spec: ShiftSpec, name: str) -> Dataset:
    """
    按名字生成一个域：基准分布的种子为spec.seed XOR crc32(name)，再施加spec中的偏移。
    @params:
        spec: ShiftSpec 设定
        name: str 域名
    @return:
        d: Dataset 带标签的数据集
    """
    base_seed, rng = domain_streams(spec.seed ^ zlib.crc32(name.encode("utf-8")))
    x, y = draw_base(spec, base_seed)
    return Dataset(Tensor(apply_shift(x, spec, rng)), y, name, spec.class_count)


def make_shift_pair(spec: ShiftSpec) -> Tuple[Dataset, Dataset]:
    """
    生成一对源域与目标域，目标域由独立采样的基准分布经偏移得到。
    两个域都带标签，目标域标签只用于评估。
    @params:
        spec: ShiftSpec 设定
    @return:
        source: Dataset 源域
        target: Dataset 目标域
    """
    source_seed, source_rng = domain_streams(spec.seed ^ SOURCE_SALT)
    xs, ys = draw_base(spec, source_seed)
    if spec.source_noise_sigma > 0:
        xs = xs + source_rng.normal(0.0, spec.source_noise_sigma, size = xs.shape)
    target_seed, target_rng = domain_streams(spec.seed ^ TARGET_SALT)
    xt, yt = draw_base(spec, target_seed)
    xt = apply_shift(xt, spec, target_rng)
    return Dataset(Tensor(xs), ys, "source", spec.class_count), Dataset(Tensor(xt), yt, "target", spec.class_count)


def add_gaussian_noise(d: Dataset, sigma: float, seed: int) -> Dataset:
    """
    给特征加上独立同分布的N(0, σ²)噪声，标签与域名不变。
    @params:
        d: Dataset 数据集
        sigma: float 标准差σ
        seed: int 随机种子
    @return:
        d: Dataset 加噪后的数据集
    """
    if not sigma >= 0:
        raise ConfigError("Noise level must be non-negative, got %r." % (sigma,))
    if sigma == 0:
        return d
    rng = np.random.default_rng(seed)
    return d.with_features(d.features.data + rng.normal(0.0, sigma, size = d.features.shape))
