"""
Services layer for FedGH Simulator
Contains data generation, local training, aggregation, the round loop and metrics export
"""
