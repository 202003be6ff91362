import numpy as np
from torch.utils.data.sampler import Sampler


class BucketBatchSampler(Sampler):
    """Batches of similar-length examples.

    Indices are shuffled, cut into buckets of ``bucket_size`` batches, sorted
    by length inside each bucket and split into batches; the batch order is
    shuffled again. Shuffling is seeded by (seed, epoch), so ``set_epoch``
    must be called to get a new order.
    """

    def __init__(self, lengths, batch_size, shuffle=True, drop_last=False, bucket_size=50, seed=0):
        if batch_size < 1:
            raise ValueError('batch_size must be >= 1, got {}'.format(batch_size))
        self.lengths = np.asarray(lengths, dtype=np.int64)
        self.batch_size = batch_size
        self.shuffle = shuffle
        self.drop_last = drop_last
        self.bucket_size = bucket_size
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch):
        self.epoch = epoch

    def _batches(self):
        num = len(self.lengths)
        if self.shuffle:
            rng = np.random.RandomState(np.random.SeedSequence([self.seed, self.epoch]).generate_state(1)[0])
            indices = rng.permutation(num)
        else:
            rng = None
            indices = np.arange(num)
        chunk = self.batch_size * self.bucket_size
        batches = []
        for start in range(0, num, chunk):
            bucket = indices[start:start + chunk]
            bucket = bucket[np.argsort(self.lengths[bucket], kind='stable')]
            for b in range(0, len(bucket), self.batch_size):
                batch = bucket[b:b + self.batch_size].tolist()
                if len(batch) < self.batch_size and self.drop_last:
                    continue
                batches.append(batch)
        if rng is not None:
            batches = [batches[i] for i in rng.permutation(len(batches))]
        return batches

    def __iter__(self):
        return iter(self._batches())

    def __len__(self):
        return len(self._batches())
