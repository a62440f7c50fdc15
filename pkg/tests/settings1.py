
NAME = 'test-unitnorm-experiment'

MANAGEMENT_COMMANDS = (
    'tests.test_main.Cmd',
)

EXPERIMENT = {
    'experiment': {
        'seed': 7,
        'workdir': '/tmp/unitnorm-test',
    },
    'corpus': {
        'units': 32,
        'train_utterances': '40',
    },
    'normalize': {
        't_start_grid': (50, 100),
    },
    'decode': {
        'omega_grid': '0, 1.5',
    },
    'evaluation': {
        'dedup': 'yes',
    },
}

INIT_HANDLER = 'tests.test_core_commands.init_handler'
