"""Toy-scale GAN trainer for perceptual-difference (MRI) targets."""
