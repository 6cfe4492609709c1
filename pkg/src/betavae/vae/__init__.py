"""beta-VAE models, losses, optimizers and training."""

from .checkpoint import CheckpointError, load_model, save_model
from .losses import (
    DomainError,
    beta_vae_loss,
    kl_gaussian,
    recon_bernoulli,
    recon_gaussian_sigma,
    reparameterize,
)
from .models import BERNOULLI, CONV, MLP, Likelihood, VaeModel, build_conv, build_mlp, build_model
from .optim import Adagrad, Adam, make_optimizer
from .training import TrainConfig, TrainCurves, TrainingDiverged, train
