
NAME = 'test-unitnorm-desk'

EXPERIMENT = {
    'experiment': {
        'seed': 1,
    },
    'corpus': {
        'min_phonemes': 20,
        'max_phonemes': 32,
    },
    'normalize': {
        't_start': 100,
        't_start_grid': (50, 100, 150),
    },
    'decode': {
        'iterations': 15,
        'omega': 0.5,
        'omega_grid': (0.0, 0.5, 3.0),
        'guidance_iterations': (5, 15),
        'iteration_grid': (3, 5, 7, 10, 15),
    },
    'evaluation': {
        'systems': ('cmlm', 'cmlm_cg', 'cmlm_norm', 'cmlm_norm_cg'),
        'benchmark_utterances': 50,
        'ablations': True,
        'ablation_latent_dims': (8, 16, 32),
        'ablation_t_starts': (100, 150),
    },
}
