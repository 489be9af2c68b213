"""Cycle-consistent VAE that splits an image into a semantic latent (scene
content, stable across viewpoints) and a remaining latent (viewpoint and
appearance nuisances, including synthesis artifacts).

Training couples two passes over a same-scene pair dataset: a forward pass
that reconstructs each image from its partner's semantic latent plus its own
remaining latent (with standard-normal KL regularizers on every posterior),
and a reverse pass that decodes two unrelated remaining latents with one
shared semantic sample and penalizes any disagreement between the re-encoded
semantic means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import FLOAT, CameraPose, look_at
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn import layers
from .nn.optim import Adam
from .nvs import ArtifactConfig, forward_warp, inject_artifacts
from .scenesim import WorldConfig, initial_state, render
from .viewgeom import sample_novel_viewpoint


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during optimization."""


@dataclass(frozen=True)
class LatentGaussian:
    mean: np.ndarray
    logvar: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.mean).all() and np.isfinite(self.logvar).all()):
            raise ValueError("latent parameters must be finite")

    def sample(self, rng):
        eps = rng.standard_normal(self.mean.shape)
        return self.mean + np.exp(0.5 * self.logvar) * eps


@dataclass(frozen=True)
class LatentPair:
    s: LatentGaussian
    r: LatentGaussian


@dataclass
class VAEConfig:
    k_s: int = 16
    k_r: int = 16
    resolution: int = 64
    channels: tuple = (12, 24, 48)
    decoder_channels: tuple = (24, 8)  # after the first (mirrored) stage
    fc_dim: int = 128
    logvar_clamp: float = 10.0
    lambda_reverse: float = 0.5
    lr: float = 1e-3
    batch_pairs: int = 8
    steps: int = 1800
    seed: int = 0
    log_every: int = 25
    train_dtype: str = "float32"  # gradient checks use float64 tensors

    @property
    def spatial(self):
        # three stride-2 convolutions
        return self.resolution // 8

    @property
    def flat_dim(self):
        return self.channels[-1] * self.spatial * self.spatial


# ---------------------------------------------------------------------------
# parameters


def init_vae_params(config: VAEConfig, rng) -> dict:
    p = {}
    c1, c2, c3 = config.channels
    layers.init_conv(p, "enc.conv1", 3, c1, 3, rng)
    layers.init_conv(p, "enc.conv2", c1, c2, 3, rng)
    layers.init_conv(p, "enc.conv3", c2, c3, 3, rng)
    layers.init_linear(p, "enc.fc1", config.flat_dim, config.fc_dim, rng)
    layers.init_linear(p, "enc.fc2", config.fc_dim,
                       2 * (config.k_s + config.k_r), rng,
                       scale=np.sqrt(1.0 / config.fc_dim))
    d1, d2 = config.decoder_channels
    layers.init_linear(p, "dec.fc1", config.k_s + config.k_r, config.fc_dim, rng)
    layers.init_linear(p, "dec.fc2", config.fc_dim, config.flat_dim, rng)
    layers.init_conv(p, "dec.conv1", c3, d1, 3, rng)
    layers.init_conv(p, "dec.conv2", d1, d2, 3, rng)
    layers.init_conv(p, "dec.conv3", d2, 3, 3, rng)
    return p


def cast_params(params, dtype):
    for p in params.values():
        p.data = p.data.astype(dtype)
    return params


def _to_nchw(images):
    arr = np.asarray(images, dtype=FLOAT)
    if arr.ndim == 3:
        arr = arr[None]
    return np.transpose(arr, (0, 3, 1, 2))


def encode_graph(params, config: VAEConfig, x: Tensor):
    """x: (N, 3, H, W) -> (s_mean, s_logvar, r_mean, r_logvar) tensors."""
    h = ad.relu(layers.conv(params, "enc.conv1", x, stride=2, pad=1))
    h = ad.relu(layers.conv(params, "enc.conv2", h, stride=2, pad=1))
    h = ad.relu(layers.conv(params, "enc.conv3", h, stride=2, pad=1))
    h = ad.reshape(h, (h.shape[0], config.flat_dim))
    h = ad.relu(layers.linear(params, "enc.fc1", h))
    out = layers.linear(params, "enc.fc2", h)
    ks, kr = config.k_s, config.k_r
    c = config.logvar_clamp
    s_mean = out[:, :ks]
    s_logvar = ad.clip(out[:, ks:2 * ks], -c, c)
    r_mean = out[:, 2 * ks:2 * ks + kr]
    r_logvar = ad.clip(out[:, 2 * ks + kr:], -c, c)
    return s_mean, s_logvar, r_mean, r_logvar


def decode_graph(params, config: VAEConfig, z: Tensor):
    """z: (N, k_s + k_r) -> image batch (N, 3, H, W) in [0, 1]."""
    c1, c2, c3 = config.channels
    h = ad.relu(layers.linear(params, "dec.fc1", z))
    h = ad.relu(layers.linear(params, "dec.fc2", h))
    h = ad.reshape(h, (h.shape[0], c3, config.spatial, config.spatial))
    h = ad.relu(layers.conv(params, "dec.conv1", ad.upsample_nearest2(h), pad=1))
    h = ad.relu(layers.conv(params, "dec.conv2", ad.upsample_nearest2(h), pad=1))
    h = layers.conv(params, "dec.conv3", ad.upsample_nearest2(h), pad=1)
    return ad.sigmoid(h)


def encode(params, config: VAEConfig, image) -> LatentPair:
    """Posterior parameters for one (H, W, 3) image or a batch."""
    arr = _to_nchw(image)
    if arr.shape[2] != config.resolution or arr.shape[3] != config.resolution:
        raise ValueError(f"image resolution {arr.shape[2:]} != model "
                         f"{config.resolution}")
    s_mean, s_logvar, r_mean, r_logvar = encode_graph(params, config, Tensor(arr))
    squeeze = np.asarray(image).ndim == 3
    def out(t):
        return t.data[0] if squeeze else t.data
    return LatentPair(
        s=LatentGaussian(out(s_mean), out(s_logvar)),
        r=LatentGaussian(out(r_mean), out(r_logvar)),
    )


def decode(params, config: VAEConfig, s, r):
    """Decode latent vectors to an (H, W, 3) image (or batch)."""
    s = np.asarray(s, dtype=FLOAT)
    r = np.asarray(r, dtype=FLOAT)
    squeeze = s.ndim == 1
    if squeeze:
        s, r = s[None], r[None]
    if s.shape[1] != config.k_s or r.shape[1] != config.k_r:
        raise ValueError("latent dimensions do not match the model")
    img = decode_graph(params, config, Tensor(np.concatenate([s, r], axis=1))).data
    img = np.transpose(img, (0, 2, 3, 1))
    return img[0] if squeeze else img


# ---------------------------------------------------------------------------
# losses


def _kl_standard_normal(mean: Tensor, logvar: Tensor):
    """KL(N(mean, diag(exp(logvar))) || N(0, I)), summed over dims, per row."""
    var = ad.exp(logvar)
    term = ad.add(ad.add(ad.mul(mean, mean), var), ad.mul(logvar, -1.0))
    return ad.mul(ad.tsum(term + (-1.0), axis=1), 0.5)


def _reparam(mean: Tensor, logvar: Tensor, rng):
    eps = rng.standard_normal(mean.shape)
    return ad.add(mean, ad.mul(ad.exp(ad.mul(logvar, 0.5)), eps))


def forward_loss_graph(params, config: VAEConfig, x1: Tensor, x2: Tensor, rng):
    """Swap-reconstruction loss for a batch of same-scene pairs.

    Reconstruction likelihood is unit-variance Gaussian (half squared
    error); every posterior carries a standard-normal KL. Returns the
    per-pair loss vector as a Tensor of shape (N,).
    """
    s1_m, s1_lv, r1_m, r1_lv = encode_graph(params, config, x1)
    s2_m, s2_lv, r2_m, r2_lv = encode_graph(params, config, x2)
    s1 = _reparam(s1_m, s1_lv, rng)
    s2 = _reparam(s2_m, s2_lv, rng)
    r1 = _reparam(r1_m, r1_lv, rng)
    r2 = _reparam(r2_m, r2_lv, rng)
    recon1 = decode_graph(params, config, ad.concat([s2, r1], axis=1))
    recon2 = decode_graph(params, config, ad.concat([s1, r2], axis=1))
    d1 = ad.add(recon1, ad.mul(x1, -1.0))
    d2 = ad.add(recon2, ad.mul(x2, -1.0))
    nll = ad.mul(ad.tsum(ad.mul(d1, d1), axis=(1, 2, 3))
                 + ad.tsum(ad.mul(d2, d2), axis=(1, 2, 3)), 0.5)
    kl = (_kl_standard_normal(r1_m, r1_lv) + _kl_standard_normal(r2_m, r2_lv)
          + _kl_standard_normal(s1_m, s1_lv) + _kl_standard_normal(s2_m, s2_lv))
    return ad.add(nll, kl)


def reverse_loss_graph(params, config: VAEConfig, xa: Tensor, xb: Tensor, rng):
    """Shared-semantic cycle loss for batches of (unrelated) images.

    One semantic sample drawn from the prior decodes with each image's
    remaining latent; the re-encoded semantic means must agree (L1).
    Returns the per-row loss vector.
    """
    _, _, ra_m, ra_lv = encode_graph(params, config, xa)
    _, _, rb_m, rb_lv = encode_graph(params, config, xb)
    ra = _reparam(ra_m, ra_lv, rng)
    rb = _reparam(rb_m, rb_lv, rng)
    s_star = Tensor(rng.standard_normal((xa.shape[0], config.k_s)))
    ia = decode_graph(params, config, ad.concat([s_star, ra], axis=1))
    ib = decode_graph(params, config, ad.concat([s_star, rb], axis=1))
    sa_m, _, _, _ = encode_graph(params, config, ia)
    sb_m, _, _, _ = encode_graph(params, config, ib)
    return ad.tsum(ad.absolute(ad.add(sa_m, ad.mul(sb_m, -1.0))), axis=1)


def forward_loss(params, config: VAEConfig, pair, rng) -> float:
    """Scalar forward-process loss for one image pair (I1, I2)."""
    i1, i2 = pair
    x1 = Tensor(_to_nchw(i1))
    x2 = Tensor(_to_nchw(i2))
    return float(forward_loss_graph(params, config, x1, x2, rng).data[0])


def reverse_loss(params, config: VAEConfig, image_a, image_b, rng) -> float:
    """Scalar reverse-process loss for two images (any scenes)."""
    xa = Tensor(_to_nchw(image_a))
    xb = Tensor(_to_nchw(image_b))
    return float(reverse_loss_graph(params, config, xa, xb, rng).data[0])


# ---------------------------------------------------------------------------
# pair dataset


@dataclass
class PairDataset:
    """Same-scene view pairs with synthesis-style corruption.

    images: (N, 2, 3, H, W) float32 in [0, 1]. scene_tags identify the
    source scene (probe supervision only, never used by training losses).
    """

    images: np.ndarray
    scene_tags: np.ndarray
    pose_records: list = field(default_factory=list)

    def __len__(self):
        return len(self.scene_tags)

    def pair(self, i):
        a = np.transpose(self.images[i, 0].astype(FLOAT), (1, 2, 0))
        b = np.transpose(self.images[i, 1].astype(FLOAT), (1, 2, 0))
        return a, b

    def flat_images(self):
        n = len(self)
        return self.images.reshape(2 * n, *self.images.shape[2:])

    def flat_tags(self):
        return np.repeat(self.scene_tags, 2)


def _random_view_pose(rng, config: WorldConfig) -> CameraPose:
    radius = rng.uniform(0.35, 0.65)
    azimuth = rng.uniform(0.0, 2 * np.pi)
    elevation = rng.uniform(np.radians(25), np.radians(70))
    pos = np.array([
        radius * np.cos(elevation) * np.sin(azimuth),
        radius * np.cos(elevation) * np.cos(azimuth) * -1.0,
        radius * np.sin(elevation),
    ])
    target = np.array([rng.uniform(-0.06, 0.06), rng.uniform(-0.04, 0.10), 0.02])
    return CameraPose(position=pos, orientation=look_at(pos, target),
                      intrinsics=config.camera_intrinsics(),
                      resolution=(config.resolution, config.resolution))


def _corrupted_view(state, pose: CameraPose, rng, artifact_cfg: ArtifactConfig,
                    config: WorldConfig):
    """Render near the pose, warp onto it, and inject artifacts: the holes
    and distortions mimic an imperfect generative synthesizer."""
    jitter = rng.normal(0.0, 0.02, size=3)
    src_pos = pose.position + jitter
    src = CameraPose(position=src_pos,
                     orientation=look_at(src_pos, pose.position + 0.4 * pose.forward),
                     intrinsics=pose.intrinsics, resolution=pose.resolution)
    frame = render(state, src, config)
    view = forward_warp(frame, pose)
    seed = int(rng.integers(0, 2 ** 31))
    view = inject_artifacts(view, ArtifactConfig(
        severity=artifact_cfg.severity, modes=artifact_cfg.modes, seed=seed,
        max_warp_px=artifact_cfg.max_warp_px,
        max_color_shift=artifact_cfg.max_color_shift,
        noise_blend=artifact_cfg.noise_blend))
    return view.rgb


def build_pair_dataset(scenes, n_pairs: int, rng,
                       artifact_cfg: ArtifactConfig | None = None,
                       config: WorldConfig | None = None) -> PairDataset:
    """Render same-scene view pairs (second view adaptively offset from the
    first), both corrupted; deterministic for a given rng state."""
    if not scenes:
        raise ValueError("need at least one scene")
    config = config or WorldConfig()
    artifact_cfg = artifact_cfg or ArtifactConfig(severity=0.35)
    res = config.resolution
    images = np.zeros((n_pairs, 2, 3, res, res), dtype=np.float32)
    tags = np.zeros(n_pairs, dtype=np.int64)
    pose_records = []
    for i in range(n_pairs):
        tag = int(rng.integers(0, len(scenes)))
        tags[i] = tag
        state = initial_state(scenes[tag], config,
                              gripper_position=[rng.uniform(-0.2, 0.2),
                                                rng.uniform(-0.22, 0.12),
                                                rng.uniform(0.05, 0.25)],
                              gripper_yaw=rng.uniform(-np.pi, np.pi))
        cam1 = _random_view_pose(rng, config)
        frame1 = render(state, cam1, config)
        cam2 = sample_novel_viewpoint(cam1, frame1.depth, rng)
        for j, cam in enumerate((cam1, cam2)):
            rgb = _corrupted_view(state, cam, rng, artifact_cfg, config)
            images[i, j] = np.transpose(rgb.astype(np.float32), (2, 0, 1))
        pose_records.append((cam1, cam2))
    return PairDataset(images=images, scene_tags=tags, pose_records=pose_records)


# ---------------------------------------------------------------------------
# training


def train_vae(dataset: PairDataset, config: VAEConfig):
    """Minimize forward + lambda * reverse with Adam. Returns (params, curve);
    the curve rows are (step, forward, reverse, total). Deterministic per
    config.seed."""
    if len(dataset) == 0:
        raise ValueError("pair dataset is empty")
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    params = init_vae_params(config, rng)
    opt = Adam(params, lr=config.lr)
    flat = dataset.flat_images()
    n_pairs = len(dataset)
    n_flat = len(flat)
    curve = []
    for step_i in range(config.steps):
        idx = rng.integers(0, n_pairs, size=min(config.batch_pairs, n_pairs))
        x1 = Tensor(dataset.images[idx, 0].astype(FLOAT))
        x2 = Tensor(dataset.images[idx, 1].astype(FLOAT))
        fwd = ad.tmean(forward_loss_graph(params, config, x1, x2, rng))
        ia = rng.integers(0, n_flat, size=len(idx))
        ib = rng.integers(0, n_flat, size=len(idx))
        xa = Tensor(flat[ia].astype(FLOAT))
        xb = Tensor(flat[ib].astype(FLOAT))
        rev = ad.tmean(reverse_loss_graph(params, config, xa, xb, rng))
        total = ad.add(fwd, ad.mul(rev, config.lambda_reverse))
        if not np.isfinite(total.data):
            raise TrainingDivergedError(
                f"non-finite loss at step {step_i}: forward={fwd.data}, "
                f"reverse={rev.data}")
        opt.zero_grad()
        total.backward()
        opt.step()
        if step_i % config.log_every == 0 or step_i == config.steps - 1:
            curve.append((step_i, float(fwd.data), float(rev.data),
                          float(total.data)))
    return params, curve


# ---------------------------------------------------------------------------
# plain conv encoder (no-disentanglement ablation)


def init_plain_encoder(config: VAEConfig, rng) -> dict:
    """Three conv layers + a head producing a (k_s + k_r)-dim feature that
    substitutes for the disentangled latents."""
    p = {}
    c1, c2, c3 = config.channels
    layers.init_conv(p, "plain.conv1", 3, c1, 3, rng)
    layers.init_conv(p, "plain.conv2", c1, c2, 3, rng)
    layers.init_conv(p, "plain.conv3", c2, c3, 3, rng)
    layers.init_linear(p, "plain.fc", config.flat_dim, config.k_s + config.k_r, rng)
    return p


def plain_encode_graph(params, config: VAEConfig, x: Tensor):
    h = ad.relu(layers.conv(params, "plain.conv1", x, stride=2, pad=1))
    h = ad.relu(layers.conv(params, "plain.conv2", h, stride=2, pad=1))
    h = ad.relu(layers.conv(params, "plain.conv3", h, stride=2, pad=1))
    h = ad.reshape(h, (h.shape[0], config.flat_dim))
    return layers.linear(params, "plain.fc", h)


def plain_encode(params, config: VAEConfig, image) -> LatentPair:
    """Split the raw conv feature into pseudo (s, r) halves."""
    arr = _to_nchw(image)
    feat = plain_encode_graph(params, config, Tensor(arr)).data
    squeeze = np.asarray(image).ndim == 3
    if squeeze:
        feat = feat[0]
    s, r = feat[..., :config.k_s], feat[..., config.k_s:]
    zeros_s, zeros_r = np.zeros_like(s), np.zeros_like(r)
    return LatentPair(s=LatentGaussian(s, zeros_s), r=LatentGaussian(r, zeros_r))


# ---------------------------------------------------------------------------
# linear probe (evaluation utility)


def linear_probe_accuracy(train_x, train_y, test_x, test_y, n_classes,
                          steps=400, lr=0.1, seed=0) -> float:
    """Multinomial logistic regression on fixed features; returns test accuracy."""
    rng = np.random.default_rng(seed)
    train_x = np.asarray(train_x, dtype=FLOAT)
    test_x = np.asarray(test_x, dtype=FLOAT)
    mu = train_x.mean(axis=0)
    sd = train_x.std(axis=0) + 1e-8
    train_x = (train_x - mu) / sd
    test_x = (test_x - mu) / sd
    params = {}
    layers.init_linear(params, "probe", train_x.shape[1], n_classes, rng,
                       scale=0.01)
    opt = Adam(params, lr=lr)
    x = Tensor(train_x)
    onehot = np.eye(n_classes)[np.asarray(train_y, dtype=int)]
    for _ in range(steps):
        opt.zero_grad()
        logits = layers.linear(params, "probe", x)
        logp = ad.log_softmax(logits, axis=-1)
        loss = ad.mul(ad.tsum(ad.mul(logp, onehot)), -1.0 / len(train_x))
        loss.backward()
        opt.step()
    logits = test_x @ params["probe.w"].data + params["probe.b"].data
    return float((np.argmax(logits, axis=1) == np.asarray(test_y)).mean())
