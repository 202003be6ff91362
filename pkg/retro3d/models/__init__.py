from .retro3d import Retro3D
from .loss import Retro3DLoss, rdrop_forward, total_loss
from .decoding import DecodeResult, beam_search, beam_search_core, greedy_core, greedy_decode, model_step_fn
from .metric import TokenAccuracy, TopKAccuracy, candidate_flags, topk_metrics
from .build import build_model
