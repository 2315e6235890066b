from .helpers import *
from .filters import *
