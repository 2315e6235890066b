from .base import Attack
from .newtonfool import NewtonFoolPath, newtonfool_path
from .registry import (
    ATTACKS, bim, cw2, fgsm, generate_set, get_attack, mi, newtonfool, pointwise,
    resolve_delta, run_attack
)
