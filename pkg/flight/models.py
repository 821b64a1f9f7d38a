from django.db import models


class SimulationRun(models.Model):
    COMMANDS = [
        ('SIMULATE', 'Simulate'),
        ('LEMMA_AUDIT', 'Lemma audit'),
    ]

    RUN_MODES = [
        ('oracle', 'Oracle'),
        ('deployment', 'Deployment'),
    ]

    THRUST_STRATEGIES = [
        ('lee2010', 'Projected (cos)'),
        ('kar', 'Unscaled'),
        ('proposed', 'Half-angle'),
    ]

    scenario = models.CharField(max_length=100)
    config_path = models.CharField(max_length=500, blank=True)
    command = models.CharField(max_length=20, choices=COMMANDS, default='SIMULATE')
    run_mode = models.CharField(max_length=20, choices=RUN_MODES, default='oracle')
    thrust_strategy = models.CharField(max_length=20, choices=THRUST_STRATEGIES, default='proposed')
    dt = models.FloatField()
    duration = models.FloatField()
    steps = models.IntegerField(default=0)
    final_ex_norm = models.FloatField(null=True, blank=True)
    max_psi_R_Rd = models.FloatField(null=True, blank=True)
    max_psi_Rd_Rc = models.FloatField(null=True, blank=True)
    violations = models.IntegerField(default=0)
    exit_code = models.IntegerField(default=0)
    output_path = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['scenario', 'created_at'], name='flight_run_scenario_idx'),
        ]

    def __str__(self):
        return f"{self.command} {self.scenario} -> {self.exit_code}"

    @property
    def succeeded(self) -> bool:
        return self.exit_code == 0
