from .augment import flip_aug, naive_flip, random_augment, rotate_aug
from .io import LfFormatError, load_hybrid, load_lf, save_hybrid, save_lf
from .lightfield import (
    Epi,
    HybridInput,
    LightField,
    central_view_index,
    downscale_lf,
    rgb_to_y,
    simulate_hybrid,
)
from .resample import bicubic_resample, bicubic_sample, resample_matrix
from .structure import StructureReport, extract_epi, structure_check
