# Phonon Bath Tool
# This tool evaluates the LA-phonon displacement average and correlation function
