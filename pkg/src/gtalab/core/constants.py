EPS = 1e-7

LAYER_NORM_EPS = 1e-6
INIT_STD = 0.02
FFN_RATIO = 4

CHECKPOINT_MAGIC = b"GTAC"
CHECKPOINT_VERSION = 1

REPORT_SCHEMA = "gtalab.run-report"
REPORT_SCHEMA_VERSION = 1

DEFAULT_RATES = (0.15, 0.3, 0.5, 1.0)
LAMBDA_SWEEP = (0.1, 1.0, 10.0, 100.0)

# per-method default regularization strength; lambda grids are built around it
DEFAULT_ALPHA = {"none": 0.0, "gta": 1.0, "msa-guide": 0.1, "block-guide": 0.1, "l2sp": 0.01}
DEFAULT_MASS_FRACTION = 0.6

# four glyph families x four sizes; larger glyphs would overflow the image
MAX_SYNTHETIC_CLASSES = 16
