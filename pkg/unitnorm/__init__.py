"""
Desk-scale speech-to-unit translation experiments: synthetic corpus,
latent diffusion normalization of target units and non-autoregressive
decoding with classifier-free guidance.
"""


__version__ = '0.1.1'
