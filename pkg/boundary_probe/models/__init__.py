from .network import *
from .image import *
from .adversarial import *
from .region import *
from .ensemble import *
from .config import *
