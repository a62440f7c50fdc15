
MANAGEMENT_COMMANDS = (
    'tests.test_main.Cmd',
)

CONFIG_CLASS = 'tests.test_main.AppConfig'
