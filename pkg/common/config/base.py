"""Task-agnostic experiment configuration.

A task module imports ``_C`` from here, fills in its own groups and defaults,
and exposes the result as ``cfg``. Keys set here are read by the shared
training loop pieces (checkpointer, solver builders, dataloaders).
"""

from yacs.config import CfgNode as CN

# ---------------------------------------------------------------------------- #
# Config definition
# ---------------------------------------------------------------------------- #
_C = CN()
# Overwritten by different tasks
_C.TASK = ''

# ---------------------------------------------------------------------------- #
# Resume
# ---------------------------------------------------------------------------- #
# Continue from the tagged last checkpoint of OUTPUT_DIR
_C.AUTO_RESUME = True
# Restore optimizer, scheduler and loop counters along with the parameters
_C.RESUME_STATES = True
# Explicit parameter file to start from (.r3d)
_C.RESUME_PATH = ''

# ---------------------------------------------------------------------------- #
# Model
# ---------------------------------------------------------------------------- #
_C.MODEL = CN()
_C.MODEL.TYPE = ''

# ---------------------------------------------------------------------------- #
# Dataset
# ---------------------------------------------------------------------------- #
_C.DATASET = CN()
_C.DATASET.TYPE = ''

# ---------------------------------------------------------------------------- #
# DataLoader
# ---------------------------------------------------------------------------- #
_C.DATALOADER = CN()
# Worker processes. Examples are assembled up front, so 0 is usually enough
_C.DATALOADER.NUM_WORKERS = 0
# Drop the short batch of each bucket when training
_C.DATALOADER.DROP_LAST = False
# Batches per length bucket
_C.DATALOADER.BUCKET_SIZE = 50

# ---------------------------------------------------------------------------- #
# Optimizer
# ---------------------------------------------------------------------------- #
_C.OPTIMIZER = CN()
_C.OPTIMIZER.TYPE = ''

# Multiplied by the scheduler factor
_C.OPTIMIZER.BASE_LR = 0.001
_C.OPTIMIZER.WEIGHT_DECAY = 0.0
# Clip the global gradient norm. Non-positive for disable
_C.OPTIMIZER.MAX_GRAD_NORM = 0.0

_C.OPTIMIZER.Adam = CN()
_C.OPTIMIZER.Adam.betas = (0.9, 0.999)
_C.OPTIMIZER.Adam.eps = 1e-8

# ---------------------------------------------------------------------------- #
# Scheduler (learning rate schedule)
# ---------------------------------------------------------------------------- #
_C.SCHEDULER = CN()
_C.SCHEDULER.TYPE = ''

# ---------------------------------------------------------------------------- #
# Train
# ---------------------------------------------------------------------------- #
_C.TRAIN = CN()

_C.TRAIN.BATCH_SIZE = 1
_C.TRAIN.MAX_EPOCH = 1
# Stop after this many optimisation steps. 0 for disable
_C.TRAIN.MAX_STEPS = 0
# Stop after this many validations without improvement
_C.TRAIN.PATIENCE = 1
# Period (in steps) to log training status. 0 for disable
_C.TRAIN.LOG_PERIOD = 0
# Number of best checkpoints to keep
_C.TRAIN.MAX_TO_KEEP = 0

# ---------------------------------------------------------------------------- #
# Validation
# ---------------------------------------------------------------------------- #
_C.VAL = CN()

_C.VAL.BATCH_SIZE = 1
# Period (in epochs) to validate. 0 for disable
_C.VAL.PERIOD = 0
# Higher is better
_C.VAL.METRIC = ''

# ---------------------------------------------------------------------------- #
# Test
# ---------------------------------------------------------------------------- #
_C.TEST = CN()
# Parameter file to evaluate. Empty for model_average.r3d of OUTPUT_DIR
_C.TEST.WEIGHT = ''

# ---------------------------------------------------------------------------- #
# Misc options
# ---------------------------------------------------------------------------- #
# '@' derives the output directory from the config path (configs -> outputs)
_C.OUTPUT_DIR = '@'

# Negative for a fresh seed per run
_C.RNG_SEED = -1
