
MANAGEMENT_COMMANDS = (
    'tests.test_main.CmdBadType',
)

CONTEXT_CLASS = 'tests.test_core_config.ContextTest'

EXPERIMENT = {
    'vae': {
        'latent_dim': 'sixteen',
    },
}
