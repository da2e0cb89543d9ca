"""Quantized matrix completion with a smoothed rank and a translated Huber penalty."""
