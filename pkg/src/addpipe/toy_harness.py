"""Desk-scale conditional denoiser: proves the dropout + dual-guidance contract end to end.

A tiny MLP learns noise prediction on 2-D point data with (source point,
instruction id) conditioning, trained with the same condition-dropout rule the
full-scale recipe records. Sampling combines the three score branches through
cfg_combine, so guidance strength visibly steers which mode gets sampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .editing import ConditioningPair, DropoutConfig, GuidanceScales, LatentState, TrainHyperparams, cfg_combine
from .errors import PipelineError

N_TIMESTEPS = 50


def _beta_schedule(n: int = N_TIMESTEPS) -> np.ndarray:
    return np.linspace(1e-4, 0.2, n)


@dataclass
class ToyDataset:
    """(source point, target point, instruction id) triples in 2-D."""

    sources: np.ndarray
    targets: np.ndarray
    instruction_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.targets)


def make_two_mode_dataset(n: int = 4000, seed: int = 0, mode_distance: float = 1.5) -> ToyDataset:
    """Balanced two-mode task: instruction id picks which mode the target sits in."""
    rng = np.random.default_rng(seed)
    ids = rng.integers(0, 2, size=n)
    centers = np.stack([two_mode_centers(mode_distance)[i] for i in ids])
    sources = rng.normal(0.0, 0.1, size=(n, 2))
    targets = centers + rng.normal(0.0, 0.1, size=(n, 2))
    return ToyDataset(sources=sources, targets=targets, instruction_ids=ids)


def two_mode_centers(mode_distance: float = 1.5) -> np.ndarray:
    return np.array([[mode_distance, 0.0], [-mode_distance, 0.0]])


class ToyDenoiser(nn.Module):
    """MLP noise predictor over (z, t, text condition, image condition) with presence bits."""

    def __init__(self, hidden: int = 64, n_instructions: int = 2):
        super().__init__()
        self.n_instructions = n_instructions
        in_dim = 2 + 1 + n_instructions + 1 + 2 + 1
        self.net = nn.Sequential(
            nn.Linear(in_dim, hidden),
            nn.SiLU(),
            nn.Linear(hidden, hidden),
            nn.SiLU(),
            nn.Linear(hidden, 2),
        )

    def forward(self, z, t_frac, c_text, text_present, c_image, image_present):
        x = torch.cat([z, t_frac, c_text * text_present, text_present, c_image * image_present, image_present], dim=1)
        return self.net(x)


def make_toy_denoiser(seed: int = 0, hidden: int = 64, n_instructions: int = 2) -> ToyDenoiser:
    torch.manual_seed(seed)
    return ToyDenoiser(hidden=hidden, n_instructions=n_instructions)


def _condition_tensors(model: ToyDenoiser, batch: int, instruction_ids, sources):
    """Build (c_text, text_present, c_image, image_present) tensors; None means absent."""
    if instruction_ids is None:
        c_text = torch.zeros(batch, model.n_instructions)
        text_present = torch.zeros(batch, 1)
    else:
        c_text = torch.nn.functional.one_hot(
            torch.as_tensor(instruction_ids, dtype=torch.long), model.n_instructions
        ).float()
        text_present = torch.ones(batch, 1)
    if sources is None:
        c_image = torch.zeros(batch, 2)
        image_present = torch.zeros(batch, 1)
    else:
        c_image = torch.as_tensor(np.array(sources, dtype=np.float32)).reshape(batch, 2)
        image_present = torch.ones(batch, 1)
    return c_text, text_present, c_image, image_present


def toy_train(
    dataset: ToyDataset,
    model: ToyDenoiser,
    dropout_cfg: DropoutConfig,
    hyper: TrainHyperparams,
    seed: int = 0,
) -> tuple[ToyDenoiser, list[float]]:
    """Denoising-score-matching loop with per-sample condition dropout.

    Returns the trained model and the per-epoch mean loss curve. Raises on a
    non-finite loss, naming the epoch. Seed-deterministic (single-threaded).
    """
    torch.set_num_threads(1)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    betas = torch.as_tensor(_beta_schedule(), dtype=torch.float32)
    alpha_bar = torch.cumprod(1.0 - betas, dim=0)

    optimizer = torch.optim.Adam(model.parameters(), lr=hyper.lr)
    batch_size = hyper.per_worker_batch
    n = len(dataset)
    targets = torch.as_tensor(dataset.targets, dtype=torch.float32)
    curve: list[float] = []

    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            batch = len(idx)
            x0 = targets[idx]
            t = torch.as_tensor(rng.integers(0, N_TIMESTEPS, size=batch), dtype=torch.long)
            noise = torch.as_tensor(rng.standard_normal((batch, 2)), dtype=torch.float32)
            ab = alpha_bar[t].unsqueeze(1)
            z_t = torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * noise

            c_text_rows = []
            text_bits = []
            c_image_rows = []
            image_bits = []
            for row, sample_index in enumerate(idx):
                pair = ConditioningPair(
                    c_T=int(dataset.instruction_ids[sample_index]),
                    c_I=dataset.sources[sample_index],
                )
                pair = dropout_conditions_draw(pair, dropout_cfg, rng)
                if pair.c_T is None:
                    c_text_rows.append(torch.zeros(model.n_instructions))
                    text_bits.append(0.0)
                else:
                    c_text_rows.append(
                        torch.nn.functional.one_hot(torch.tensor(pair.c_T), model.n_instructions).float()
                    )
                    text_bits.append(1.0)
                if pair.c_I is None:
                    c_image_rows.append(torch.zeros(2))
                    image_bits.append(0.0)
                else:
                    c_image_rows.append(torch.as_tensor(pair.c_I, dtype=torch.float32))
                    image_bits.append(1.0)

            c_text = torch.stack(c_text_rows)
            text_present = torch.tensor(text_bits).unsqueeze(1)
            c_image = torch.stack(c_image_rows)
            image_present = torch.tensor(image_bits).unsqueeze(1)
            t_frac = (t.float() / N_TIMESTEPS).unsqueeze(1)

            predicted = model(z_t, t_frac, c_text, text_present, c_image, image_present)
            loss = torch.mean((predicted - noise) ** 2)
            if not torch.isfinite(loss):
                raise PipelineError(f"toy training diverged at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        curve.append(float(np.mean(epoch_losses)))
    return model, curve


def dropout_conditions_draw(pair: ConditioningPair, cfg: DropoutConfig, rng: np.random.Generator) -> ConditioningPair:
    from .editing import dropout_conditions

    return dropout_conditions(pair, cfg, float(rng.random()))


def _predict_noise(model: ToyDenoiser, z: np.ndarray, t: int, instruction_id, sources) -> np.ndarray:
    batch = z.shape[0]
    zt = torch.as_tensor(z, dtype=torch.float32)
    t_frac = torch.full((batch, 1), t / N_TIMESTEPS, dtype=torch.float32)
    ids = None if instruction_id is None else np.full(batch, instruction_id)
    c_text, text_present, c_image, image_present = _condition_tensors(model, batch, ids, sources)
    with torch.no_grad():
        out = model(zt, t_frac, c_text, text_present, c_image, image_present)
    return out.numpy().astype(np.float64)


def sample_toy(
    model: ToyDenoiser,
    n: int,
    instruction_id: int,
    sources: np.ndarray,
    scales: GuidanceScales,
    seed: int = 0,
) -> np.ndarray:
    """Ancestral sampling with the three-branch guidance combination per step."""
    rng = np.random.default_rng(seed)
    betas = _beta_schedule()
    alphas = 1.0 - betas
    alpha_bar = np.cumprod(alphas)

    z = rng.standard_normal((n, 2))
    for t in range(N_TIMESTEPS - 1, -1, -1):
        e_uncond = _predict_noise(model, z, t, None, None)
        e_img = _predict_noise(model, z, t, None, sources)
        e_full = _predict_noise(model, z, t, instruction_id, sources)
        eps = cfg_combine(e_uncond, e_img, e_full, scales)
        coef = betas[t] / np.sqrt(1.0 - alpha_bar[t])
        z = (z - coef * eps) / np.sqrt(alphas[t])
        if t > 0:
            z = z + np.sqrt(betas[t]) * rng.standard_normal((n, 2))
    return z


def mode_hit_rate(samples: np.ndarray, instruction_id: int, mode_distance: float = 1.5) -> float:
    """Fraction of samples closer to the instructed mode than to the other one."""
    centers = two_mode_centers(mode_distance)
    d_instructed = np.linalg.norm(samples - centers[instruction_id], axis=1)
    d_other = np.linalg.norm(samples - centers[1 - instruction_id], axis=1)
    return float(np.mean(d_instructed < d_other))


class ToyDenoiserHandle:
    """DenoiserHandle adapter over a trained toy model (score = predicted noise)."""

    def __init__(self, model: ToyDenoiser):
        self.name = "toy-denoiser"
        self.model = model

    def score(self, latent: LatentState, c_T=None, c_I=None) -> np.ndarray:
        z = np.atleast_2d(np.asarray(latent.z_t, dtype=np.float64))
        ids = None if c_T is None else int(c_T)
        sources = None if c_I is None else np.broadcast_to(np.asarray(c_I, dtype=np.float64), z.shape)
        out = _predict_noise(self.model, z, int(latent.t), ids, sources)
        return out.reshape(np.asarray(latent.z_t).shape)
