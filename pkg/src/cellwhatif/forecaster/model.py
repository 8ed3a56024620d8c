"""Per-cluster encoder/decoder sequence models and the fitted bundle.

Each metric cluster gets one attention-based sequence-to-sequence model.
The encoder reads the cluster's own history alongside its parent series;
the decoder reads the recent half of the history continued by the
historical average as the initial guess for the target span, plus parents
over both spans, and cross-attends to the encoder.  A single projection
maps hidden states back to metric space — shared by the forecasting path
(decoder output) and the reconstruction path (encoder output on a masked
input), so the two hidden representations can be aligned during training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from cellwhatif.forecaster import nn
from cellwhatif.forecaster.graph import GraphicalModel
from cellwhatif.forecaster.scaler import Scaler
from cellwhatif.forecaster.windows import WindowSample


@dataclass(frozen=True)
class ClusterModelConfig:
    cluster: str
    own_metrics: tuple[str, ...]
    parent_dim: int
    input_len: int = 96
    output_len: int = 96
    d_model: int = 32
    n_heads: int = 2
    n_encoder_layers: int = 1
    n_decoder_layers: int = 1
    d_ff: int = 64
    mask_ratio: float = 0.7

    def __post_init__(self) -> None:
        if self.input_len % 2 != 0:
            raise ValueError("input_len must be even")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must divide by n_heads")
        if not (0.0 <= self.mask_ratio < 1.0):
            raise ValueError("mask_ratio must lie in [0, 1)")

    @property
    def input_dim(self) -> int:
        return len(self.own_metrics) + self.parent_dim

    @property
    def decoder_len(self) -> int:
        return self.input_len // 2 + self.output_len


@dataclass
class ClusterModel:
    config: ClusterModelConfig
    params: dict[str, nn.Tensor]

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())


def _init_linear(rng, params, name, d_in, d_out):
    params[f"{name}.w"] = nn.parameter(rng.normal(0.0, 1.0 / math.sqrt(d_in), (d_in, d_out)))
    params[f"{name}.b"] = nn.parameter(np.zeros(d_out))


def _init_ln(params, name, d):
    params[f"{name}.g"] = nn.parameter(np.ones(d))
    params[f"{name}.b"] = nn.parameter(np.zeros(d))


def _init_attn(rng, params, name, d):
    for proj in ("wq", "wk", "wv", "wo"):
        params[f"{name}.{proj}"] = nn.parameter(rng.normal(0.0, 1.0 / math.sqrt(d), (d, d)))
    for bias in ("bq", "bk", "bv", "bo"):
        params[f"{name}.{bias}"] = nn.parameter(np.zeros(d))


def init_cluster_model(config: ClusterModelConfig, seed: int) -> ClusterModel:
    rng = np.random.default_rng(seed)
    p: dict[str, nn.Tensor] = {}
    D = config.d_model
    _init_linear(rng, p, "enc_embed", config.input_dim, D)
    _init_linear(rng, p, "dec_embed", config.input_dim, D)
    for i in range(config.n_encoder_layers):
        _init_ln(p, f"enc{i}.ln1", D)
        _init_attn(rng, p, f"enc{i}.attn", D)
        _init_ln(p, f"enc{i}.ln2", D)
        _init_linear(rng, p, f"enc{i}.ffn1", D, config.d_ff)
        _init_linear(rng, p, f"enc{i}.ffn2", config.d_ff, D)
    _init_ln(p, "enc_out_ln", D)
    for i in range(config.n_decoder_layers):
        _init_ln(p, f"dec{i}.ln1", D)
        _init_attn(rng, p, f"dec{i}.self", D)
        _init_ln(p, f"dec{i}.ln2", D)
        _init_attn(rng, p, f"dec{i}.cross", D)
        _init_ln(p, f"dec{i}.ln3", D)
        _init_linear(rng, p, f"dec{i}.ffn1", D, config.d_ff)
        _init_linear(rng, p, f"dec{i}.ffn2", config.d_ff, D)
    _init_ln(p, "dec_out_ln", D)
    _init_linear(rng, p, "proj", D, len(config.own_metrics))
    return ClusterModel(config=config, params=p)


def positional_encoding(length: int, d_model: int, offset: int = 0) -> np.ndarray:
    """Fixed sinusoidal positions [offset, offset + length)."""
    pos = np.arange(offset, offset + length, dtype=float)[:, None]
    i = np.arange(d_model, dtype=float)[None, :]
    angles = pos / np.power(10000.0, 2.0 * (i // 2) / d_model)
    enc = np.where(i % 2 == 0, np.sin(angles), np.cos(angles))
    return enc


def _attention(p, prefix: str, q_in: nn.Tensor, kv_in: nn.Tensor, n_heads: int) -> nn.Tensor:
    B, Tq, D = q_in.shape
    Tk = kv_in.shape[1]
    dh = D // n_heads

    def heads(x, T):
        return nn.swapaxes(nn.reshape(x, (B, T, n_heads, dh)), 1, 2)

    q = heads(nn.linear(q_in, p[f"{prefix}.wq"], p[f"{prefix}.bq"]), Tq)
    k = heads(nn.linear(kv_in, p[f"{prefix}.wk"], p[f"{prefix}.bk"]), Tk)
    v = heads(nn.linear(kv_in, p[f"{prefix}.wv"], p[f"{prefix}.bv"]), Tk)
    scores = nn.scale(nn.matmul(q, nn.swapaxes(k, -1, -2)), 1.0 / math.sqrt(dh))
    ctx = nn.matmul(nn.softmax(scores), v)  # (B, H, Tq, dh)
    merged = nn.reshape(nn.swapaxes(ctx, 1, 2), (B, Tq, D))
    return nn.linear(merged, p[f"{prefix}.wo"], p[f"{prefix}.bo"])


def _ffn(p, prefix: str, x: nn.Tensor) -> nn.Tensor:
    h = nn.gelu(nn.linear(x, p[f"{prefix}1.w"], p[f"{prefix}1.b"]))
    return nn.linear(h, p[f"{prefix}2.w"], p[f"{prefix}2.b"])


def _ln(p, prefix: str, x: nn.Tensor) -> nn.Tensor:
    return nn.layer_norm(x, p[f"{prefix}.g"], p[f"{prefix}.b"])


def encode(model: ClusterModel, x_src: np.ndarray, pa_src: np.ndarray) -> nn.Tensor:
    """Encoder hidden states over the history span: (B, I, D)."""
    cfg, p = model.config, model.params
    inp = nn.constant(np.concatenate([x_src, pa_src], axis=-1))
    h = nn.linear(inp, p["enc_embed.w"], p["enc_embed.b"])
    h = nn.add(h, nn.constant(positional_encoding(cfg.input_len, cfg.d_model)))
    for i in range(cfg.n_encoder_layers):
        normed = _ln(p, f"enc{i}.ln1", h)
        h = nn.add(h, _attention(p, f"enc{i}.attn", normed, normed, cfg.n_heads))
        h = nn.add(h, _ffn(p, f"enc{i}.ffn", _ln(p, f"enc{i}.ln2", h)))
    return _ln(p, "enc_out_ln", h)


def decode(
    model: ClusterModel,
    enc_out: nn.Tensor,
    x_src: np.ndarray,
    pa_src: np.ndarray,
    pa_tgt: np.ndarray,
) -> nn.Tensor:
    """Decoder hidden states over [t - I/2, t + O): (B, I/2 + O, D).

    Decoder data tokens: the latter half of the history followed by the
    look-back average repeated as the initial guess for the target span.
    """
    cfg, p = model.config, model.params
    half = cfg.input_len // 2
    guess = np.repeat(
        x_src.mean(axis=1, keepdims=True), cfg.output_len, axis=1
    )
    x_dec = np.concatenate([x_src[:, half:, :], guess], axis=1)
    pa_dec = np.concatenate([pa_src[:, half:, :], pa_tgt], axis=1)
    inp = nn.constant(np.concatenate([x_dec, pa_dec], axis=-1))
    h = nn.linear(inp, p["dec_embed.w"], p["dec_embed.b"])
    h = nn.add(
        h, nn.constant(positional_encoding(cfg.decoder_len, cfg.d_model, offset=half))
    )
    for i in range(cfg.n_decoder_layers):
        normed = _ln(p, f"dec{i}.ln1", h)
        h = nn.add(h, _attention(p, f"dec{i}.self", normed, normed, cfg.n_heads))
        h = nn.add(h, _attention(p, f"dec{i}.cross", _ln(p, f"dec{i}.ln2", h),
                                 enc_out, cfg.n_heads))
        h = nn.add(h, _ffn(p, f"dec{i}.ffn", _ln(p, f"dec{i}.ln3", h)))
    return _ln(p, "dec_out_ln", h)


def project(model: ClusterModel, hidden: nn.Tensor) -> nn.Tensor:
    return nn.linear(hidden, model.params["proj.w"], model.params["proj.b"])


def forward_forecast(
    model: ClusterModel,
    x_src: np.ndarray,
    pa_src: np.ndarray,
    pa_tgt: np.ndarray,
) -> tuple[nn.Tensor, nn.Tensor]:
    """(forecast over the target span (B, O, d_own), decoder overlap hidden).

    The overlap hidden states cover [t - I/2, t - 1] and pair with the
    reconstruction encoder's latter half for the alignment loss.
    """
    cfg = model.config
    _check_shapes(model, x_src, pa_src, pa_tgt)
    enc_out = encode(model, x_src, pa_src)
    dec_out = decode(model, enc_out, x_src, pa_src, pa_tgt)
    half = cfg.input_len // 2
    y_hat = project(model, nn.slice_along(dec_out, 1, half, cfg.decoder_len))
    overlap = nn.slice_along(dec_out, 1, 0, half)
    return y_hat, overlap


def forward_reconstruct(
    model: ClusterModel,
    x_masked: np.ndarray,
    pa_src: np.ndarray,
) -> tuple[nn.Tensor, nn.Tensor]:
    """(reconstruction of the history span (B, I, d_own), encoder overlap).

    Runs the encoder on the masked history and maps it through the shared
    projection; the overlap hidden states cover the latter half.
    """
    cfg = model.config
    enc_out = encode(model, x_masked, pa_src)
    recon = project(model, enc_out)
    half = cfg.input_len // 2
    overlap = nn.slice_along(enc_out, 1, half, cfg.input_len)
    return recon, overlap


def forecast(model: ClusterModel, window: WindowSample) -> np.ndarray:
    """Inference-only forecast for one window, in scaled metric space (O, d)."""
    y_hat, _ = forward_forecast(
        model,
        window.x_src[None],
        window.pa_src[None],
        window.pa_tgt[None],
    )
    out = y_hat.data[0]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite forecast output")
    return out


def forecast_with_parents(
    model: ClusterModel,
    window: WindowSample,
    pa_tgt: np.ndarray,
) -> np.ndarray:
    """Forecast with an overridden target-span parent matrix (O, p)."""
    if pa_tgt.shape != window.pa_tgt.shape:
        raise ValueError(
            f"parent override shape {pa_tgt.shape} != expected {window.pa_tgt.shape}"
        )
    y_hat, _ = forward_forecast(
        model, window.x_src[None], window.pa_src[None], pa_tgt[None]
    )
    return y_hat.data[0]


def sample_entry_mask(
    rng: np.random.Generator, input_len: int, n_metrics: int, mask_ratio: float
) -> np.ndarray:
    """Boolean (I, d) mask with exactly ceil(ratio * I * d) True entries."""
    total = input_len * n_metrics
    n_masked = math.ceil(mask_ratio * total)
    flat = np.zeros(total, dtype=bool)
    if n_masked:
        flat[rng.choice(total, size=n_masked, replace=False)] = True
    return flat.reshape(input_len, n_metrics)


def reconstruct(
    model: ClusterModel,
    window: WindowSample,
    mask_ratio: float | None = None,
    rng: np.random.Generator | int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(reconstruction of the latter half (I/2, d), entry mask used (I, d)).

    Randomly masks input entries to zero (seeded via ``rng``), encodes, and
    projects back to metric space.  Loss consumers combine the returned mask
    with the observation mask and the latter-half restriction.
    """
    cfg = model.config
    ratio = cfg.mask_ratio if mask_ratio is None else mask_ratio
    if not (0.0 <= ratio < 1.0):
        raise ValueError("mask_ratio must lie in [0, 1)")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    entry_mask = sample_entry_mask(rng, cfg.input_len, len(cfg.own_metrics), ratio)
    x_masked = np.where(entry_mask, 0.0, window.x_src)
    recon, _ = forward_reconstruct(model, x_masked[None], window.pa_src[None])
    half = cfg.input_len // 2
    return recon.data[0, half:], entry_mask


def _check_shapes(model, x_src, pa_src, pa_tgt):
    cfg = model.config
    if x_src.shape[-1] != len(cfg.own_metrics):
        raise ValueError(
            f"{cfg.cluster}: expected {len(cfg.own_metrics)} own metrics, "
            f"got {x_src.shape[-1]}"
        )
    if pa_src.shape[-1] != cfg.parent_dim or pa_tgt.shape[-1] != cfg.parent_dim:
        raise ValueError(
            f"{cfg.cluster}: parent series width {pa_src.shape[-1]}/{pa_tgt.shape[-1]} "
            f"!= declared parent dim {cfg.parent_dim}"
        )
    if x_src.shape[1] != cfg.input_len or pa_tgt.shape[1] != cfg.output_len:
        raise ValueError("window lengths do not match the model configuration")


@dataclass
class ForecastModel:
    """The full fitted bundle: graph, per-cluster models, per-cluster scalers."""

    graph: GraphicalModel
    models: dict[str, ClusterModel]
    scalers: dict[str, Scaler]
    input_len: int = 96
    output_len: int = 96

    def clusters(self) -> list[str]:
        return self.graph.topological_order()


def build_forecast_model(
    graph: GraphicalModel,
    scalers: dict[str, Scaler],
    input_len: int = 96,
    output_len: int = 96,
    d_model: int = 32,
    n_heads: int = 2,
    n_encoder_layers: int = 1,
    n_decoder_layers: int = 1,
    d_ff: int = 64,
    mask_ratio: float = 0.7,
    seed: int = 0,
) -> ForecastModel:
    models = {}
    for idx, cluster in enumerate(graph.clusters):
        cfg = ClusterModelConfig(
            cluster=cluster,
            own_metrics=tuple(graph.cluster_metrics[cluster]),
            parent_dim=graph.parent_dim(cluster),
            input_len=input_len,
            output_len=output_len,
            d_model=d_model,
            n_heads=n_heads,
            n_encoder_layers=n_encoder_layers,
            n_decoder_layers=n_decoder_layers,
            d_ff=d_ff,
            mask_ratio=mask_ratio,
        )
        models[cluster] = init_cluster_model(cfg, seed=seed * 1000 + idx)
    return ForecastModel(
        graph=graph,
        models=models,
        scalers=scalers,
        input_len=input_len,
        output_len=output_len,
    )


def clone_model(model: ForecastModel) -> ForecastModel:
    """Deep copy of all parameters (configs and scalers are immutable)."""
    models = {
        name: ClusterModel(
            config=m.config,
            params={k: nn.parameter(v.data.copy()) for k, v in m.params.items()},
        )
        for name, m in model.models.items()
    }
    return replace(model, models=models)
