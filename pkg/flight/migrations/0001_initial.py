# Generated by Django 5.2.6 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario', models.CharField(max_length=100)),
                ('config_path', models.CharField(blank=True, max_length=500)),
                ('command', models.CharField(choices=[('SIMULATE', 'Simulate'), ('LEMMA_AUDIT', 'Lemma audit')], default='SIMULATE', max_length=20)),
                ('run_mode', models.CharField(choices=[('oracle', 'Oracle'), ('deployment', 'Deployment')], default='oracle', max_length=20)),
                ('thrust_strategy', models.CharField(choices=[('lee2010', 'Projected (cos)'), ('kar', 'Unscaled'), ('proposed', 'Half-angle')], default='proposed', max_length=20)),
                ('dt', models.FloatField()),
                ('duration', models.FloatField()),
                ('steps', models.IntegerField(default=0)),
                ('final_ex_norm', models.FloatField(blank=True, null=True)),
                ('max_psi_R_Rd', models.FloatField(blank=True, null=True)),
                ('max_psi_Rd_Rc', models.FloatField(blank=True, null=True)),
                ('violations', models.IntegerField(default=0)),
                ('exit_code', models.IntegerField(default=0)),
                ('output_path', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['scenario', 'created_at'], name='flight_run_scenario_idx')],
            },
        ),
    ]
