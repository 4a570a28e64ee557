"""Generator and patch discriminator for reading-to-photo translation."""

import torch
import torch.nn as nn


def expand_reading(reading):
    """Fixed stem: append the smooth rectangular components.

    The input channels are (magnitude, phase/pi); the phase wraps at +-1,
    which makes it hash-like under pose changes. mag*cos(pi*phase) and
    mag*sin(pi*phase) are the field's re/im parts (up to the shared
    normalizer) and vary continuously, so convolutions can interpolate.
    """
    mag = reading[:, 0:1]
    phase = reading[:, 1:2] * torch.pi
    return torch.cat([reading, mag * torch.cos(phase), mag * torch.sin(phase)], dim=1)


class _CenteredStem(nn.Module):
    """expand_reading minus the train-split mean map.

    The readings contain a constant direct-illumination term per element;
    subtracting the train mean of the expanded channels (exactly the
    direct field, in the re/im channels) leaves the pose-dependent
    scatter as the dominant signal. The mean is a buffer, so it ships
    inside checkpoints.
    """

    def __init__(self):
        super().__init__()
        self.register_buffer("input_mean", torch.zeros(4, 10, 10))

    def forward(self, reading):
        return expand_reading(reading) - self.input_mean


class Generator(nn.Module):
    """Encoder-decoder: (2, 10, 10) normalized reading -> (3, 64, 64) in [0, 1].

    Sized for CPU training: the reading is small, so a compact encoder
    plus a dense bridge into a 4x4 seed map is enough capacity. Decoder
    dropout discourages memorizing the train split.
    """

    def __init__(self, base=32):
        super().__init__()
        self.stem = _CenteredStem()
        self.encoder = nn.Sequential(
            nn.Conv2d(4, base, 3, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base, base * 2, 3, stride=2, padding=1),  # 10 -> 5
            nn.BatchNorm2d(base * 2),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.seed_channels = base * 4
        self.bridge = nn.Linear(base * 2 * 5 * 5, self.seed_channels * 4 * 4)
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(base * 4, base * 4, 4, stride=2, padding=1),  # 4 -> 8
            nn.BatchNorm2d(base * 4),
            nn.Dropout2d(0.3),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(base * 4, base * 2, 4, stride=2, padding=1),  # 8 -> 16
            nn.BatchNorm2d(base * 2),
            nn.Dropout2d(0.3),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(base * 2, base, 4, stride=2, padding=1),  # 16 -> 32
            nn.BatchNorm2d(base),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(base, 3, 4, stride=2, padding=1),  # 32 -> 64
            nn.Tanh(),
        )

    def forward(self, reading):
        h = self.encoder(self.stem(reading))
        h = self.bridge(h.flatten(1)).view(-1, self.seed_channels, 4, 4)
        return (self.decoder(h) + 1.0) / 2.0  # [0, 1] per channel


class PatchDiscriminator(nn.Module):
    """Patch-level real/fake classifier on the image conditioned on the reading."""

    def __init__(self, base=32):
        super().__init__()
        self.stem = _CenteredStem()
        self.net = nn.Sequential(
            nn.Conv2d(3 + 4, base, 4, stride=2, padding=1),  # 64 -> 32
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base, base * 2, 4, stride=2, padding=1),  # 32 -> 16
            nn.BatchNorm2d(base * 2),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 2, base * 4, 4, stride=2, padding=1),  # 16 -> 8
            nn.BatchNorm2d(base * 4),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 4, 1, 4, padding=1),  # 8 -> 7x7 patch logits
        )

    def forward(self, image, reading):
        cond = torch.nn.functional.interpolate(
            self.stem(reading), size=image.shape[-2:], mode="nearest"
        )
        return self.net(torch.cat([image, cond], dim=1))
