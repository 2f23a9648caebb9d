"""NAADA: noise-aware attention denoising autoencoder toolkit.

From-scratch numerical stack for denoising panoramic radiographs:
a tensor/autodiff core with compiled hot kernels, a five-stage
radiographic noise synthesizer, the NASA attention block inside a
convolutional denoising autoencoder, a training engine and a PSNR/SSIM
evaluation harness.
"""

__version__ = "0.1.0"
