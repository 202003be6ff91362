"""Retro3D experiments configuration"""

from common.config.base import CN, _C

# public alias
cfg = _C
_C.TASK = 'retro3d'
_C.VAL.METRIC = 'top1'

# ----------------------------------------------------------------------------- #
# Dataset
# ----------------------------------------------------------------------------- #
_C.DATASET.TYPE = 'ReactionDataset'
_C.DATASET.TRAIN = ''
_C.DATASET.VAL = ''
_C.DATASET.TEST = ''
# JSON-lines conformer records keyed by reaction id
_C.DATASET.CONFORMERS = ''
_C.DATASET.VOCAB = ''
# skip / zero / synthetic
_C.DATASET.ON_MISSING_CONFORMER = 'zero'
# Prepend the reaction-class token to the product
_C.DATASET.USE_CLASS = False

# ---------------------------------------------------------------------------- #
# Model
# ---------------------------------------------------------------------------- #
_C.MODEL.TYPE = 'Retro3D'
_C.MODEL.Retro3D = CN()
_C.MODEL.Retro3D.dim = 512
_C.MODEL.Retro3D.num_encoder_layers = 6
_C.MODEL.Retro3D.num_decoder_layers = 6
_C.MODEL.Retro3D.num_heads = 8
_C.MODEL.Retro3D.spatial_heads = 4
_C.MODEL.Retro3D.ffn_dim = 2048
_C.MODEL.Retro3D.num_kernels = 512
_C.MODEL.Retro3D.dropout = 0.1
_C.MODEL.Retro3D.attention_dropout = 0.1
_C.MODEL.Retro3D.embedding_dropout = 0.1
_C.MODEL.Retro3D.max_length = 512
_C.MODEL.Retro3D.comenet_layers = 3
# Ablation switches
_C.MODEL.Retro3D.use_fusion = True
_C.MODEL.Retro3D.use_distance_attention = True
_C.MODEL.Retro3D.refine = True
# Keep the leading minus sign of the Gaussian basis
_C.MODEL.Retro3D.negate_gaussian = True
# Hard mask on spatial heads for atom pairs farther apart (angstrom). 0 for disable
_C.MODEL.Retro3D.spatial_cutoff = 0.0

# ---------------------------------------------------------------------------- #
# Loss
# ---------------------------------------------------------------------------- #
_C.LOSS = CN()
# R-Drop KL weight
_C.LOSS.ALPHA = 0.5
# SMILES alignment weight. 0 disables alignment guidance
_C.LOSS.BETA = 1.0
_C.LOSS.SAM_LOSS_MODE = 'row_ce'

# ---------------------------------------------------------------------------- #
# Optimizer and scheduler
# ---------------------------------------------------------------------------- #
_C.OPTIMIZER.TYPE = 'Adam'
_C.OPTIMIZER.BASE_LR = 1.0
_C.OPTIMIZER.WEIGHT_DECAY = 1e-3
_C.OPTIMIZER.Adam.betas = (0.9, 0.98)
_C.OPTIMIZER.Adam.eps = 1e-9

_C.SCHEDULER.TYPE = 'NoamLR'
_C.SCHEDULER.NoamLR = CN()
_C.SCHEDULER.NoamLR.model_size = 512
_C.SCHEDULER.NoamLR.warmup_steps = 8000
_C.SCHEDULER.NoamLR.factor = 2.0

# ---------------------------------------------------------------------------- #
# Train
# ---------------------------------------------------------------------------- #
_C.TRAIN.BATCH_SIZE = 16
_C.TRAIN.MAX_EPOCH = 1000
_C.TRAIN.PATIENCE = 7
# On-the-fly root re-rooting of products
_C.TRAIN.AUGMENT = True
# Number of best checkpoints kept and averaged at the end
_C.TRAIN.MAX_TO_KEEP = 7
_C.TRAIN.LOG_PERIOD = 50

# ---------------------------------------------------------------------------- #
# Validation
# ---------------------------------------------------------------------------- #
_C.VAL.BATCH_SIZE = 16
_C.VAL.PERIOD = 1
_C.VAL.BEAM = 1
# Examples decoded per validation. 0 for all
_C.VAL.MAX_EXAMPLES = 0

# ---------------------------------------------------------------------------- #
# Test
# ---------------------------------------------------------------------------- #
_C.TEST.BEAM = 10
_C.TEST.TOPK = (1, 3, 5, 10)
_C.TEST.MAX_LENGTH = 200
_C.TEST.NUM_THREADS = 1


def validate_cfg(cfg):
    """Check cross-field invariants; raises ValueError."""
    model_cfg = cfg.MODEL[cfg.MODEL.TYPE]
    if model_cfg.dim % model_cfg.num_heads != 0:
        raise ValueError('MODEL.dim ({}) must be divisible by num_heads ({})'.format(
            model_cfg.dim, model_cfg.num_heads))
    if model_cfg.dim % 2 != 0:
        raise ValueError('MODEL.dim must be even, got {}'.format(model_cfg.dim))
    if not 1 <= model_cfg.spatial_heads < model_cfg.num_heads:
        raise ValueError('MODEL.spatial_heads must be in [1, {}), got {}'.format(
            model_cfg.num_heads, model_cfg.spatial_heads))
    if model_cfg.num_kernels % model_cfg.spatial_heads != 0:
        raise ValueError('MODEL.num_kernels ({}) must be divisible by spatial_heads ({})'.format(
            model_cfg.num_kernels, model_cfg.spatial_heads))
    if model_cfg.num_decoder_layers < 1:
        raise ValueError('MODEL.num_decoder_layers must be >= 1')
    if cfg.LOSS.ALPHA < 0 or cfg.LOSS.BETA < 0:
        raise ValueError('LOSS.ALPHA and LOSS.BETA must be non-negative')
    if cfg.LOSS.SAM_LOSS_MODE != 'row_ce':
        raise ValueError('Unsupported SAM loss mode: {}'.format(cfg.LOSS.SAM_LOSS_MODE))
    if cfg.TRAIN.BATCH_SIZE < 1 or cfg.VAL.BATCH_SIZE < 1:
        raise ValueError('batch sizes must be >= 1')
    if cfg.TRAIN.PATIENCE < 1:
        raise ValueError('TRAIN.PATIENCE must be >= 1')
    if cfg.TEST.BEAM < max(cfg.TEST.TOPK):
        raise ValueError('TEST.BEAM ({}) must be >= max(TEST.TOPK) ({})'.format(cfg.TEST.BEAM, max(cfg.TEST.TOPK)))
    if cfg.DATASET.ON_MISSING_CONFORMER not in ('skip', 'zero', 'synthetic'):
        raise ValueError('Unsupported on_missing_conformer: {}'.format(cfg.DATASET.ON_MISSING_CONFORMER))
