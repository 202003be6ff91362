import json
import os.path as osp

import pytest

from common.config import purge_cfg
from common.utils.checkpoint import load_params
from retro3d.config.retro3d import cfg as default_cfg, validate_cfg
from retro3d.train_retro3d import train
from retro3d.test_retro3d import test as run_test

_ROOT_DIR = osp.abspath(osp.join(osp.dirname(__file__), '..', '..'))
DESK = osp.join(_ROOT_DIR, 'configs', 'uspto50k', 'retro3d_desk.yaml')
SAMPLE = osp.join(_ROOT_DIR, 'data', 'sample')
# split sizes the step counts below are computed for
MICRO_TRAIN, MICRO_TEST = 38, 38


def _head(name, count, directory):
    path = osp.join(directory, '{}.{}.txt'.format(name, count))
    with open(osp.join(SAMPLE, name + '.txt')) as f:
        lines = f.readlines()[:count]
    with open(path, 'w') as f:
        f.writelines(lines)
    return path


def micro_cfg(output_dir, max_epoch=3):
    data_dir = osp.dirname(output_dir)
    train_file = _head('valid', MICRO_TRAIN, data_dir)
    test_file = _head('test', MICRO_TEST, data_dir)
    cfg = default_cfg.clone()
    cfg.defrost()
    cfg.merge_from_file(DESK)
    cfg.merge_from_list([
        'MODEL.Retro3D.dim', 16,
        'MODEL.Retro3D.num_encoder_layers', 1,
        'MODEL.Retro3D.num_decoder_layers', 1,
        'MODEL.Retro3D.num_heads', 2,
        'MODEL.Retro3D.spatial_heads', 1,
        'MODEL.Retro3D.ffn_dim', 32,
        'MODEL.Retro3D.num_kernels', 4,
        'MODEL.Retro3D.comenet_layers', 1,
        'MODEL.Retro3D.max_length', 96,
        'SCHEDULER.NoamLR.model_size', 16,
        'SCHEDULER.NoamLR.warmup_steps', 10,
        'DATASET.TRAIN', train_file,
        'DATASET.VAL', test_file,
        'DATASET.TEST', test_file,
        'TRAIN.MAX_EPOCH', max_epoch,
        'TRAIN.MAX_TO_KEEP', 2,
        'VAL.PERIOD', 1,
        'VAL.MAX_EXAMPLES', 2,
        'TEST.BEAM', 3,
        'TEST.TOPK', (1, 3),
        'TEST.MAX_LENGTH', 40,
        'OUTPUT_DIR', output_dir,
        'RNG_SEED', 7,
    ])
    purge_cfg(cfg)
    validate_cfg(cfg)
    cfg.freeze()
    return cfg


def _records(path, record_type):
    with open(path) as f:
        return [r for r in map(json.loads, f) if r['type'] == record_type]


@pytest.mark.slow
def test_train_resume_and_evaluate(tmp_path):
    output_dir = str(tmp_path / 'run')
    result = train(micro_cfg(output_dir, max_epoch=3), output_dir)
    assert result['epoch'] == 3
    assert result['step'] == 9
    assert osp.exists(result['average_path'])

    train_records = _records(osp.join(output_dir, 'metrics.jsonl'), 'train')
    assert [r['step'] for r in train_records] == list(range(1, 10))
    assert train_records[-1]['ce_loss'] < train_records[0]['ce_loss']
    assert len(_records(osp.join(output_dir, 'metrics.jsonl'), 'val')) == 3

    params, header = load_params(result['average_path'])
    assert header['config']['vocab'] == result['vocab'].itos
    assert len(header['meta']['averaged']) == 2

    # resume from the last checkpoint
    resumed = train(micro_cfg(output_dir, max_epoch=4), output_dir)
    assert resumed['epoch'] == 4
    assert resumed['step'] == 12

    metric = run_test(micro_cfg(output_dir), output_dir)
    assert metric.num_examples > 0
    assert osp.exists(osp.join(output_dir, 'predictions.tsv'))


@pytest.mark.slow
def test_training_is_deterministic(tmp_path):
    logs, params = [], []
    for name in ('a', 'b'):
        output_dir = str(tmp_path / name)
        train(micro_cfg(output_dir, max_epoch=2), output_dir)
        with open(osp.join(output_dir, 'metrics.jsonl')) as f:
            logs.append(f.read())
        params.append(load_params(osp.join(output_dir, 'model_average.r3d'))[0])
    assert logs[0] == logs[1]
    assert list(params[0].keys()) == list(params[1].keys())
    for name in params[0]:
        assert params[0][name].tobytes() == params[1][name].tobytes()


def _overfit(train_file, output_dir, opts=()):
    cfg = default_cfg.clone()
    cfg.defrost()
    cfg.merge_from_file(DESK)
    cfg.merge_from_list([
        'DATASET.TRAIN', train_file,
        'DATASET.VAL', train_file,
        'DATASET.TEST', train_file,
        'TRAIN.AUGMENT', False,
        'TRAIN.MAX_EPOCH', 1000,
        'TRAIN.MAX_STEPS', 2000,
        'TRAIN.PATIENCE', 1000,
        'VAL.PERIOD', 50,
        'OUTPUT_DIR', output_dir,
    ] + list(opts))
    purge_cfg(cfg)
    validate_cfg(cfg)
    cfg.freeze()
    result = train(cfg, output_dir)
    tail = _records(osp.join(output_dir, 'metrics.jsonl'), 'train')[-100:]
    return result, sum(r['ce_loss'] for r in tail) / len(tail)


@pytest.mark.slow
def test_desk_model_overfits_small_set(tmp_path):
    train_file = _head('train', 32, str(tmp_path))
    result, final_ce = _overfit(train_file, str(tmp_path / 'overfit'))
    assert result['best_metric'] >= 95.0

    # same run with every product conformer replaced by zeros
    _, zero_ce = _overfit(train_file, str(tmp_path / 'overfit_zero'), ['DATASET.ON_MISSING_CONFORMER', 'zero'])
    assert final_ce <= zero_ce + 1e-2
