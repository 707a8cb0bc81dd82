# src/analysis/__init__.py
from .latent import (CensusResult, LatentPointSet, Mosaic, census_sample, decode_grid, embed,
                     knn_purity, neighborhood_census, reference_center)
from .tsne import TsneResult, conditional_affinities, tsne
from .export import (image_strip, read_latents_csv, read_pgm, write_census_csv,
                     write_latents_csv, write_pgm, write_tsne_csv)
