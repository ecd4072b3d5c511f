"""Integer codes shared by the compiled and pure-Python kernels."""

OK = 0
BOUNDARY = 1
SINGULAR = 2
OVERFLOW = 3

STATUS_NAMES = {OK: "ok", BOUNDARY: "boundary", SINGULAR: "singular", OVERFLOW: "overflow"}

# window kinds understood by the batch kernels
WIN_NONE = 0
WIN_INDICATOR = 1
WIN_COSINE = 2

# per-coordinate interval classification
C_IN = 0
C_OUT = 1
C_EDGE = 2

NMAX = 8
