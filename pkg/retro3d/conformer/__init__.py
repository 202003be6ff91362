from .conformer import (Conformer, ConformerError, load_conformer, conformer_record, read_conformer_file,
                        write_conformer_file, synthetic_conformer)
from .distance import distance_matrix, pairwise_distances
from .features import GeoFeatures, geo_features, lift_features, local_frames
