"""Toy depth-regression trainer.

Trains a small convolutional encoder-decoder on datasets in the
depthpoison on-disk layout to demonstrate backdoor injection end to end,
and evaluates the fine-tuning / pruning / compression defenses at toy
scale. All metric scoring is delegated to the depthpoison CLI; this
package only reads the documented file formats and shells out to the
primary tool.
"""

__version__ = "0.1.0"
