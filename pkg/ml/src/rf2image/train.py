"""Training loop: adversarial loss plus lambda*L1 (lambda = 100), Adam(2e-4, 0.5)."""

import csv
import os

import numpy as np
import torch
import torch.nn as nn

from .data import DatasetDir, reading_to_channels, train_magnitude_max
from .model import Generator, PatchDiscriminator, expand_reading

L1_WEIGHT = 100.0
LEARNING_RATE = 2e-4
BETAS = (0.5, 0.999)


def _batches(indices, batch_size, generator):
    order = torch.randperm(len(indices), generator=generator).tolist()
    for start in range(0, len(order), batch_size):
        yield [indices[i] for i in order[start : start + batch_size]]


def train(data_dir, epochs, seed, out_dir, batch_size=16, log_every=None):
    """Train on the dataset's train split; writes checkpoint.pt and losses.csv."""
    torch.manual_seed(seed)
    data = DatasetDir(data_dir)
    train_idx = data.split_indices("train")
    mag_max = train_magnitude_max(data, train_idx)

    readings = np.stack([reading_to_channels(data.reading(i), mag_max) for i in train_idx])
    photos = np.stack(
        [np.asarray(data.photo(i, "L"), dtype=np.float32) / 255.0 for i in train_idx]
    ).transpose(0, 3, 1, 2)
    x_all = torch.from_numpy(readings)
    y_all = torch.from_numpy(photos)

    gen = Generator()
    disc = PatchDiscriminator()
    with torch.no_grad():
        mean_map = expand_reading(x_all).mean(dim=0)
        gen.stem.input_mean.copy_(mean_map)
        disc.stem.input_mean.copy_(mean_map)
    opt_g = torch.optim.Adam(gen.parameters(), lr=LEARNING_RATE, betas=BETAS)
    opt_d = torch.optim.Adam(disc.parameters(), lr=LEARNING_RATE, betas=BETAS)
    bce = nn.BCEWithLogitsLoss()
    l1 = nn.L1Loss()

    shuffler = torch.Generator().manual_seed(seed)
    history = []
    for epoch in range(epochs):
        d_losses, g_adv_losses, g_l1_losses = [], [], []
        for batch in _batches(list(range(len(train_idx))), batch_size, shuffler):
            x = x_all[batch]
            y = y_all[batch]

            fake = gen(x)
            # discriminator step
            opt_d.zero_grad()
            logits_real = disc(y, x)
            logits_fake = disc(fake.detach(), x)
            loss_d = 0.5 * (
                bce(logits_real, torch.ones_like(logits_real))
                + bce(logits_fake, torch.zeros_like(logits_fake))
            )
            loss_d.backward()
            opt_d.step()

            # generator step
            opt_g.zero_grad()
            logits_fake = disc(fake, x)
            loss_adv = bce(logits_fake, torch.ones_like(logits_fake))
            loss_l1 = l1(fake, y)
            (loss_adv + L1_WEIGHT * loss_l1).backward()
            opt_g.step()

            d_losses.append(loss_d.item())
            g_adv_losses.append(loss_adv.item())
            g_l1_losses.append(loss_l1.item())
        row = (
            epoch,
            float(np.mean(d_losses)),
            float(np.mean(g_adv_losses)),
            float(np.mean(g_l1_losses)),
        )
        history.append(row)
        if log_every and epoch % log_every == 0:
            print(f"epoch {epoch}: d={row[1]:.4f} g_adv={row[2]:.4f} g_l1={row[3]:.4f}", flush=True)

    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "checkpoint.pt")
    torch.save(
        {
            "generator": gen.state_dict(),
            "discriminator": disc.state_dict(),
            "mag_max": mag_max,
            "epochs": epochs,
            "seed": seed,
            "l1_weight": L1_WEIGHT,
            "lr": LEARNING_RATE,
            "betas": BETAS,
            "batch_size": batch_size,
            "final_losses": history[-1][1:],
        },
        ckpt_path,
    )
    losses_path = os.path.join(out_dir, "losses.csv")
    with open(losses_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "d_loss", "g_adv", "g_l1"])
        w.writerows(history)
    return ckpt_path, data
