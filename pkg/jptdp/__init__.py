from .logo import *
from .utils import *
from .tagsets import *
from .conllu import *
from .autodiff import *
from .layers import *
from .eisner import *
from .model import *
from .evaluation import *
from .trainer import *
