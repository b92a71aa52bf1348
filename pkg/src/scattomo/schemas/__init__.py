from .deconvolution_schemas import *
from .document_schemas import *
from .experiment_schemas import *
from .extrapolation_schemas import *
from .hilbert_schemas import *
from .imperfection_schemas import *
from .protocol_schemas import *
from .waveguide_schemas import *
