"""
Management commands of the **unitnorm** package.
"""


UNITNORM_MANAGEMENT_COMMANDS = (
    'unitnorm.commands.gendata.GenData',
    'unitnorm.commands.trainvae.TrainVae',
    'unitnorm.commands.traindiffusion.TrainDiffusion',
    'unitnorm.commands.normalize.Normalize',
    'unitnorm.commands.trains2ut.TrainS2ut',
    'unitnorm.commands.trainar.TrainAr',
    'unitnorm.commands.decode.Decode',
    'unitnorm.commands.decodear.DecodeAr',
    'unitnorm.commands.evaluate.Evaluate',
    'unitnorm.commands.benchmark.Benchmark',
    'unitnorm.commands.schedule.Schedule',
    'unitnorm.commands.runrecipe.RunRecipe',
    'unitnorm.commands.showconfig.ShowConfig',
    'unitnorm.commands.gradcheck.Gradcheck',
)
"""
Built-in management commands.
"""
