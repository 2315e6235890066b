from .network import (
    Adam, error_rate, forward, init_params, input_gradient, logit_gradients, logits, predict,
    predict_batch, train
)
from .data import download_mnist, load_idx, load_mnist, pick_image, select, write_idx
from .ensemble import (
    alert_summary, classify_with_alert, disagreement_rate, in_uncertainty_region, load_ensemble,
    misclassification_rates, predict_matrix, save_ensemble, train_ensemble
)
from .regions import (
    ball_volume, ball_volume_monte_carlo, build_rectangle, choose_b, classify_region,
    compute_intervals, evaluate, sample, sample_ball, sweep_dimensions
)
