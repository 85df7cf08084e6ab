"""Neural vGRF and contact estimators on a small numpy autodiff engine."""
from ..grf import ContactParams, contact_labels
from .autodiff import Tensor
from .model import (VARIANTS, Model, ModelConfig, build_model, forward, load_model, param_shapes,
                    predict, save_model)
from .train import (Adam, History, OptimizerConfig, TrainingError, evaluate_loss, grad_check,
                    loss_terms, model_grad_check, train, train_step)


def derive_contacts(vgrf, layout, params=ContactParams()):
    """Contact labels of an estimated vGRF sequence, by the same rule as the ground truth."""
    return contact_labels(vgrf, layout, params)
