from .discretize import DIRECTIONS, DiscretizedROI, EmptyMaskError, discretize
from .extract import (
    ExtractionSettings,
    FeatureVector,
    extract_all,
    extract_case,
    feature_names,
    parse_name,
    read_feature_csv,
    write_feature_csv,
)
from .firstorder import first_order
from .shape import shape
from .texture import (
    glcm_features,
    glcm_matrices,
    glrlm_features,
    glrlm_matrices,
    glszm_features,
    glszm_matrix,
    ngtdm_features,
    ngtdm_matrix,
    symmetrize,
)
from .wavelet import SUBBANDS, wavelet_subbands
