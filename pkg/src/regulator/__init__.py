# Internal-model regulator
