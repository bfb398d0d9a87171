from attacks.artifacts import (
    Artifact,
    BudgetViolationError,
    GlobalPerturbation,
    PatchArtifact,
    apply,
    check_budget,
    check_pixels,
    export_patch_ppm,
    load_artifact,
    save_artifact,
)
from attacks.losses import (
    adv_loss,
    end2end_loss,
    expected_adv_loss,
    mode_sign,
    noise_prediction_loss,
    target_trajectory,
)
from attacks.global_attacks import (
    attack_offline_global,
    attack_online_global,
    perturbed_frames,
    pgd_update,
    random_noise_baseline,
    reference_trajectory,
)
from attacks.patch import AffineTransform, AffineTransformFamily, attack_patch, expected_patch_loss, replace
from attacks.end2end import end2end_attack

__all__ = [
    "Artifact",
    "BudgetViolationError",
    "GlobalPerturbation",
    "PatchArtifact",
    "apply",
    "check_budget",
    "check_pixels",
    "export_patch_ppm",
    "load_artifact",
    "save_artifact",
    "adv_loss",
    "end2end_loss",
    "expected_adv_loss",
    "mode_sign",
    "noise_prediction_loss",
    "target_trajectory",
    "attack_offline_global",
    "attack_online_global",
    "perturbed_frames",
    "pgd_update",
    "random_noise_baseline",
    "reference_trajectory",
    "AffineTransform",
    "AffineTransformFamily",
    "attack_patch",
    "expected_patch_loss",
    "replace",
    "end2end_attack",
]
